//! Unrolling of the wrapper's folded end over the target box.
//!
//! The wrapper end `W_ab` is lifted, climbs the box face it points at (the
//! entry face), folds over the top and, if long enough, down the opposite
//! side. Positions on this strip are addressed by `(s, t)`: `s` is arc length
//! from the bottom edge of the entry face, `t` the lateral box-frame
//! coordinate along the fold edges.

use nalgebra::{Vector2, Vector3};

use super::{ColoredBBox, EdgeSegment, Face, OrientedBox};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StripPiece<T: Real> {
    pub face: Face,
    /// Strip coordinate where this face begins.
    pub start: T,
    pub face_length: T,
    /// Length of this face covered by the wrapper (`<= face_length`).
    pub covered: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverPlan<T: Real> {
    pub target: OrientedBox<T>,
    pub entry: Face,
    /// Box-frame axis index (0 = x, 1 = y) of the entry face normal.
    axis: usize,
    /// Sign of the entry face normal along `axis`.
    sign: T,
    /// Wrapper length available beyond the entry face.
    pub reach: T,
    /// Covered lateral interval in box-frame coordinates.
    pub lateral: (T, T),
    pub pieces: Vec<StripPiece<T>>,
}

impl<T: Real> CoverPlan<T> {
    /// Plans which faces the wrapper covers when its `W_ab` end is folded over
    /// `target`. Returns `None` when the footprints are disjoint or the
    /// wrapper does not extend past the box.
    pub fn new(target: &OrientedBox<T>, wrapper: &ColoredBBox<T>) -> Option<Self> {
        if !footprints_overlap(target, wrapper) {
            return None;
        }
        let ab = wrapper.edge_by_label("ab").ok()?;
        let outward = target.pose.orientation.inverse() * (ab.midpoint() - wrapper.pose.position);
        let (axis, sign) = if outward.x.abs() >= outward.y.abs() {
            (0, if outward.x >= T::ZERO { T::ONE } else { -T::ONE })
        } else {
            (1, if outward.y >= T::ZERO { T::ONE } else { -T::ONE })
        };
        let entry = match (axis, sign > T::ZERO) {
            (0, true) => Face::Adhe,
            (0, false) => Face::Bcgf,
            (_, true) => Face::Cdhg,
            (_, false) => Face::Abfe,
        };
        let half = target.half_size();
        let lat = 1 - axis;
        let end_local = target.pose.inverse_transform_point(&ab.midpoint());
        let reach = end_local[axis] * sign - half[axis];
        if reach <= T::ZERO {
            return None;
        }
        let ends: Vec<T> = ab
            .endpoints
            .iter()
            .map(|p| target.pose.inverse_transform_point(p)[lat])
            .collect();
        let lo = ends[0].min(ends[1]).max(-half[lat]);
        let hi = ends[0].max(ends[1]).min(half[lat]);
        if lo >= hi {
            return None;
        }

        let mut plan = Self { target: *target, entry, axis, sign, reach, lateral: (lo, hi), pieces: Vec::new() };
        plan.pieces = plan.pieces_for(reach);
        Some(plan)
    }

    /// The same plan with the free end at strip coordinate `reach`.
    pub fn with_reach(&self, reach: T) -> Self {
        let reach = reach.max(T::ZERO);
        Self { reach, pieces: self.pieces_for(reach), ..self.clone() }
    }

    fn pieces_for(&self, reach: T) -> Vec<StripPiece<T>> {
        let height = self.target.size.z;
        let depth = self.target.size[self.axis];
        let mut pieces = Vec::new();
        let mut start = T::ZERO;
        for (face, len) in [(self.entry, height), (Face::Abcd, depth), (self.entry.opposite(), height)] {
            let covered = (reach - start).min(len);
            if covered <= T::ZERO {
                break;
            }
            pieces.push(StripPiece { face, start, face_length: len, covered });
            start += len;
        }
        pieces
    }

    pub fn faces(&self) -> Vec<Face> {
        self.pieces.iter().map(|p| p.face).collect()
    }

    /// Total strip length over the three faces the strip can reach.
    pub fn strip_capacity(&self) -> T {
        self.target.size.z * T::TWO + self.target.size[self.axis]
    }

    /// Length of the covered part of the strip.
    pub fn covered_length(&self) -> T {
        self.pieces.iter().fold(T::ZERO, |acc, p| acc + p.covered)
    }

    /// Box-frame unit vectors: entry normal `e`, lateral `l`.
    pub fn local_axes(&self) -> (Vector3<T>, Vector3<T>) {
        let mut e = Vector3::zeros();
        e[self.axis] = self.sign;
        let mut l = Vector3::zeros();
        l[1 - self.axis] = T::ONE;
        (e, l)
    }

    /// 2D profile point (along `e`, along z) and outward profile normal at
    /// strip coordinate `s` on the unrounded box surface.
    pub fn profile(&self, s: T) -> (Vector2<T>, Vector2<T>) {
        let he = self.target.size[self.axis] * T::HALF;
        let hz = self.target.size.z * T::HALF;
        let h = self.target.size.z;
        let d = self.target.size[self.axis];
        if s <= h {
            (Vector2::new(he, -hz + s), Vector2::new(T::ONE, T::ZERO))
        } else if s <= h + d {
            (Vector2::new(he - (s - h), hz), Vector2::new(T::ZERO, T::ONE))
        } else {
            (Vector2::new(-he, hz - (s - h - d)), Vector2::new(-T::ONE, T::ZERO))
        }
    }

    /// Lifts a profile point and lateral coordinate into world coordinates.
    pub fn lift(&self, profile: &Vector2<T>, t: T) -> Vector3<T> {
        let (e, l) = self.local_axes();
        let local = e * profile.x + Vector3::z() * profile.y + l * t;
        self.target.pose.transform_point(&local)
    }

    pub fn lift_normal(&self, normal: &Vector2<T>) -> Vector3<T> {
        let (e, _) = self.local_axes();
        self.target.pose.transform_vector(&(e * normal.x + Vector3::z() * normal.y))
    }

    /// Point and outward normal on the box surface at `(s, t)`.
    pub fn surface_point(&self, s: T, t: T) -> (Vector3<T>, Vector3<T>) {
        let (p, n) = self.profile(s);
        (self.lift(&p, t), self.lift_normal(&n))
    }

    /// Predicted location of the wrapper's free end after covering: the line
    /// at `s = reach` spanning the covered lateral interval.
    pub fn free_edge(&self) -> EdgeSegment<T> {
        let s = self.reach.min(self.strip_capacity());
        let (p0, _) = self.surface_point(s, self.lateral.0);
        let (p1, _) = self.surface_point(s, self.lateral.1);
        EdgeSegment { endpoints: [p0, p1], labels: ['a', 'b'] }
    }
}

fn footprints_overlap<T: Real>(target: &OrientedBox<T>, wrapper: &ColoredBBox<T>) -> bool {
    let box_corners: Vec<Vector2<T>> = [super::Vertex::E, super::Vertex::F, super::Vertex::G, super::Vertex::H]
        .iter()
        .map(|v| target.vertex(*v).xy())
        .collect();
    let sheet: Vec<Vector2<T>> = wrapper.corners().iter().map(|p| p.xy()).collect();
    // Separating axis test over the edge normals of both rectangles.
    for poly in [&box_corners, &sheet] {
        for i in 0..4 {
            let d = poly[(i + 1) % 4] - poly[i];
            let axis = Vector2::new(-d.y, d.x);
            let project = |pts: &[Vector2<T>]| {
                pts.iter().fold((T::max_value().unwrap(), T::min_value().unwrap()), |(lo, hi), p| {
                    let v = axis.dot(p);
                    (lo.min(v), hi.max(v))
                })
            };
            let (a0, a1) = project(&box_corners);
            let (b0, b1) = project(&sheet);
            if a1 < b0 || b1 < a0 {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pose, Rgb};

    fn reference_setup() -> (OrientedBox<f64>, ColoredBBox<f64>) {
        let target = OrientedBox::new(
            Pose::from_position(Vector3::new(0.0, 0.0, 0.0575)),
            Vector3::new(0.145, 0.215, 0.115),
        )
        .unwrap();
        let wrapper = ColoredBBox::new(Pose::identity(), 0.175, 0.6, Rgb::new(200, 40, 40)).unwrap();
        (target, wrapper)
    }

    #[test]
    fn paper_box_covers_right_face_and_part_of_top() {
        let (target, wrapper) = reference_setup();
        let plan = CoverPlan::new(&target, &wrapper).unwrap();
        assert_eq!(plan.entry, Face::Abfe);
        assert_eq!(plan.faces(), vec![Face::Abfe, Face::Abcd]);
        assert!((plan.reach - 0.1925).abs() < 1e-12);
        assert!((plan.pieces[1].covered - 0.0775).abs() < 1e-12);
        let edge = plan.free_edge();
        let mid = edge.midpoint();
        assert!((mid - Vector3::new(0.0, -0.1075 + 0.0775, 0.115)).norm() < 1e-12);
        assert!((edge.length() - 0.145).abs() < 1e-12);
    }

    #[test]
    fn surface_points_lie_on_box() {
        let (target, wrapper) = reference_setup();
        let plan = CoverPlan::new(&target, &wrapper).unwrap();
        for i in 0..=50 {
            let s = plan.strip_capacity() * (i as f64) / 50.0;
            let (p, n) = plan.surface_point(s, 0.01);
            assert!(target.signed_distance(&p).abs() < 1e-12);
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn disjoint_footprints_have_no_plan() {
        let (target, mut wrapper) = reference_setup();
        wrapper.pose.position = Vector3::new(2.0, 0.0, 0.0);
        assert!(CoverPlan::new(&target, &wrapper).is_none());
    }
}
