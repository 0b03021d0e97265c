use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::image::{convex_hull_real, min_area_rect};
use super::RecogError;
use crate::cloud::{KdTree, Plane, PointCloud};
use crate::geometry::{Face, OrientedBox, Pose};
use crate::Real;

/// Faces of the target that the holding hand presses and the seal goes on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetAnnotations {
    pub hold: Face,
    pub seal: Face,
}

impl Default for TargetAnnotations {
    fn default() -> Self {
        Self { hold: Face::Cdhg, seal: Face::Abcd }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct TargetModel<T: Real> {
    pub bbox: OrientedBox<T>,
    pub annotations: TargetAnnotations,
}

const MIN_HEIGHT: f64 = 0.005;
const MIN_POINTS: usize = 20;
const LOW_PCT: f64 = 0.01;
const HIGH_PCT: f64 = 0.99;
const TOP_MARGIN: f64 = 0.01;
const DENSITY_RADIUS: f64 = 0.01;
/// Points this close to the table estimate its range noise.
const NEAR_TABLE: f64 = 0.01;
/// Height cutoff in units of the table's residual noise, capped at `MAX_CUTOFF`.
const NOISE_CUTOFF: f64 = 4.0;
const MAX_CUTOFF: f64 = 0.02;
/// Tops within this band (or six noise sigmas) of the high top percentile
/// form the top surface.
const TOP_BAND: f64 = 0.01;
const TOP_PCT: f64 = 0.95;
const SIDE_BAND: f64 = 0.006;

/// Box resting on `table` that bounds the points above it.
///
/// Points count as above the table beyond 5 mm or four times the table's robust
/// residual noise, whichever is larger (capped at 2 cm). Sparse points above the
/// table, such as range outliers, are dropped first. The footprint orientation is
/// the minimum-area rectangle of the projected points, refined by a small search on
/// robust extents; each side is then placed at the median of the points near it,
/// and the height is the median height of the top surface: the points well inside
/// the footprint near their high percentile. The box yaw is reported in (-45, 45]
/// degrees relative to the plane basis, so face `abfe` is the face closest to
/// facing robot-right.
pub fn recog_target_bbox<T: Real>(
    cloud: &PointCloud<T>,
    table: &Plane<T>,
    annotations: TargetAnnotations,
) -> Result<TargetModel<T>, RecogError> {
    let up = table.oriented_up(&Vector3::z());
    let n = up.normal;
    let sigma = table_noise(&cloud.points, &up);
    let min_height = T::lit(MIN_HEIGHT).max((T::lit(NOISE_CUTOFF) * sigma).min(T::lit(MAX_CUTOFF)));
    let above: Vec<(Vector2<T>, T)> = {
        let (u0, v0) = plane_basis(&n);
        cloud
            .points
            .iter()
            .filter_map(|p| {
                let h = up.signed_distance(p);
                (h > min_height).then(|| (Vector2::new(p.dot(&u0), p.dot(&v0)), h))
            })
            .collect()
    };
    let above = dense_subset(&cloud.points, &up, min_height, above);
    if above.len() < MIN_POINTS {
        return Err(RecogError::NotFound("target above the table"));
    }
    let flat: Vec<Vector2<T>> = above.iter().map(|(q, _)| *q).collect();
    let hull = convex_hull_real(&flat);
    let (u, ..) = min_area_rect(&hull).ok_or(RecogError::NotFound("target footprint"))?;

    // Refine the orientation on robust extents.
    let base = u.y.atan2(u.x);
    let step = T::lit(0.25f64.to_radians());
    let mut best: Option<(T, T, Extents<T>)> = None;
    for k in -8i32..=8 {
        let theta = base + step * T::lit(k as f64);
        let ext = extents(&flat, theta);
        let area = (ext.u.1 - ext.u.0) * (ext.v.1 - ext.v.0);
        if best.as_ref().is_none_or(|(a, ..)| area < *a) {
            best = Some((area, theta, ext));
        }
    }
    let (_, theta, ext) = best.expect("search is nonempty");
    let ext = refine_sides(&flat, theta, ext);

    let (cu, cv) = (theta.cos(), theta.sin());
    let axis_u = Vector2::new(cu, cv);
    let axis_v = Vector2::new(-cv, cu);
    let margin_u = T::lit(TOP_MARGIN).min((ext.u.1 - ext.u.0) / T::lit(4.0));
    let margin_v = T::lit(TOP_MARGIN).min((ext.v.1 - ext.v.0) / T::lit(4.0));
    let mut tops: Vec<T> = above
        .iter()
        .filter(|(q, _)| {
            let a = q.dot(&axis_u);
            let b = q.dot(&axis_v);
            a >= ext.u.0 + margin_u && a <= ext.u.1 - margin_u && b >= ext.v.0 + margin_v && b <= ext.v.1 - margin_v
        })
        .map(|(_, h)| *h)
        .collect();
    if tops.is_empty() {
        tops = above.iter().map(|(_, h)| *h).collect();
    }
    let high = percentile(&mut tops, T::lit(TOP_PCT));
    let band = T::lit(TOP_BAND).max(T::lit(6.0) * sigma);
    let mut top: Vec<T> = tops.into_iter().filter(|h| *h >= high - band).collect();
    let height = percentile(&mut top, T::HALF);

    // Box axes in the plane basis, with yaw folded into (-45, 45].
    let size_u = ext.u.1 - ext.u.0;
    let size_v = ext.v.1 - ext.v.0;
    let center2 = axis_u * ((ext.u.0 + ext.u.1) * T::HALF) + axis_v * ((ext.v.0 + ext.v.1) * T::HALF);
    let quarter = T::frac_pi_2();
    let mut yaw = theta;
    let mut swapped = false;
    while yaw > quarter * T::HALF {
        yaw -= quarter;
        swapped = !swapped;
    }
    while yaw <= -quarter * T::HALF {
        yaw += quarter;
        swapped = !swapped;
    }
    let (sx, sy) = if swapped { (size_v, size_u) } else { (size_u, size_v) };

    let (u0, v0) = plane_basis(&n);
    let x_axis = u0 * yaw.cos() + v0 * yaw.sin();
    let y_axis = n.cross(&x_axis);
    let origin = n * up.offset;
    let center = origin + u0 * center2.x + v0 * center2.y + n * (height * T::HALF);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x_axis, y_axis, n]));
    let pose = Pose::new(center, UnitQuaternion::from_rotation_matrix(&rot));
    let bbox = OrientedBox::new(pose, Vector3::new(sx, sy, height))
        .map_err(|_| RecogError::NotFound("target with positive extent"))?;
    Ok(TargetModel { bbox, annotations })
}

/// Drops isolated points (sensor outliers off the table) whose neighbor
/// count within `DENSITY_RADIUS` is below a quarter of the median count.
fn dense_subset<T: Real>(
    points: &[Vector3<T>],
    up: &Plane<T>,
    min_height: T,
    above: Vec<(Vector2<T>, T)>,
) -> Vec<(Vector2<T>, T)> {
    let lifted: Vec<Vector3<T>> = points.iter().filter(|p| up.signed_distance(p) > min_height).copied().collect();
    if lifted.len() < MIN_POINTS {
        return above;
    }
    let tree = KdTree::build(&lifted);
    let counts: Vec<usize> = lifted.iter().map(|p| tree.within_radius(p, T::lit(DENSITY_RADIUS)).len()).collect();
    let mut sorted = counts.clone();
    sorted.sort_unstable();
    let floor = (sorted[sorted.len() / 2] / 4).max(3);
    above.into_iter().zip(counts).filter(|(_, c)| *c >= floor).map(|(a, _)| a).collect()
}

/// Robust standard deviation (scaled median absolute residual) of the points
/// within `NEAR_TABLE` of the table; zero when there are too few.
fn table_noise<T: Real>(points: &[Vector3<T>], up: &Plane<T>) -> T {
    let mut d: Vec<T> = points.iter().map(|p| up.signed_distance(p).abs()).filter(|d| *d < T::lit(NEAR_TABLE)).collect();
    if d.len() < MIN_POINTS {
        return T::ZERO;
    }
    T::lit(1.4826) * percentile(&mut d, T::HALF)
}

struct Extents<T> {
    u: (T, T),
    v: (T, T),
}

fn extents<T: Real>(pts: &[Vector2<T>], theta: T) -> Extents<T> {
    let (c, s) = (theta.cos(), theta.sin());
    let mut a: Vec<T> = pts.iter().map(|p| p.x * c + p.y * s).collect();
    let mut b: Vec<T> = pts.iter().map(|p| -p.x * s + p.y * c).collect();
    Extents {
        u: (percentile(&mut a, T::lit(LOW_PCT)), percentile(&mut a, T::lit(HIGH_PCT))),
        v: (percentile(&mut b, T::lit(LOW_PCT)), percentile(&mut b, T::lit(HIGH_PCT))),
    }
}

/// Moves each side to the median of the points within `SIDE_BAND` inside
/// it, which sits on the side face rather than on its noise tail.
fn refine_sides<T: Real>(pts: &[Vector2<T>], theta: T, ext: Extents<T>) -> Extents<T> {
    let (c, s) = (theta.cos(), theta.sin());
    let a: Vec<T> = pts.iter().map(|p| p.x * c + p.y * s).collect();
    let b: Vec<T> = pts.iter().map(|p| -p.x * s + p.y * c).collect();
    let band = T::lit(SIDE_BAND);
    let side = |vals: &[T], edge: T, inward: T| {
        let mut near: Vec<T> = vals.iter().copied().filter(|&x| (x - edge) * inward >= T::zero() && (x - edge) * inward <= band).collect();
        if near.is_empty() {
            edge
        } else {
            percentile(&mut near, T::HALF)
        }
    };
    let one = T::one();
    let u = (side(&a, ext.u.0, one), side(&a, ext.u.1, -one));
    let v = (side(&b, ext.v.0, one), side(&b, ext.v.1, -one));
    if u.1 > u.0 && v.1 > v.0 {
        Extents { u, v }
    } else {
        ext
    }
}

/// Nearest-rank percentile; reorders `values`.
fn percentile<T: Real>(values: &mut [T], q: T) -> T {
    let n = values.len();
    let idx = ((q * T::from_usize_lossy(n - 1)).round().as_f64() as usize).min(n - 1);
    *values.select_nth_unstable_by(idx, |a, b| a.total_cmp_finite(b)).1
}

/// Orthonormal in-plane basis; for a horizontal plane this is (x, y).
fn plane_basis<T: Real>(n: &Vector3<T>) -> (Vector3<T>, Vector3<T>) {
    let seed = if n.x.abs() < T::lit(0.9) { Vector3::x() } else { Vector3::y() };
    let u = (seed - n * n.dot(&seed)).normalize();
    (u, n.cross(&u))
}
