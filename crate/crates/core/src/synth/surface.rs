//! Parametric surface pieces used for both cloud sampling and rendering.

use nalgebra::Vector2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{BulgeSpec, Label};
use crate::geometry::{CoverPlan, Rgb};
use crate::Vec3;

pub const SHEET_THICKNESS: f64 = 0.001;
pub const FOLD_RADIUS: f64 = 0.005;

pub(crate) type Mask = Box<dyn Fn(&Vec3) -> bool>;

/// Surface of the sheet over the target, addressed by strip coordinates.
#[derive(Clone, Debug)]
pub(crate) struct Drape {
    pub plan: CoverPlan<f64>,
    /// Strip coordinate where the sheet leaves the surface.
    pub s_end: f64,
    pub bump: Option<Bump>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Bump {
    pub center: Vector2<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl Drape {
    pub fn new(plan: CoverPlan<f64>, s_end: f64, bulge: Option<&BulgeSpec>) -> Self {
        let s_end = s_end.clamp(0.0, plan.strip_capacity());
        let width = plan.lateral.1 - plan.lateral.0;
        let bump = bulge.and_then(|b| {
            let radius = (b.fraction * s_end * width / std::f64::consts::PI).sqrt();
            (b.amplitude > 0.0 && radius > 0.0).then(|| Bump {
                center: Vector2::new(s_end * 0.5, 0.5 * (plan.lateral.0 + plan.lateral.1)),
                radius,
                amplitude: b.amplitude,
            })
        });
        Self { plan, s_end, bump }
    }

    /// Point and outward normal on the offset sheet surface, with folds
    /// rounded where the sheet continues over the next face.
    pub fn point(&self, s: f64, t: f64) -> (Vec3, Vec3) {
        let k = FOLD_RADIUS - SHEET_THICKNESS;
        let h = self.plan.target.size.z;
        let (e, _) = self.plan.local_axes();
        let depth = self.plan.target.size.dot(&e.abs());
        let mut out = None;
        for c in [h, h + depth] {
            if (s - c).abs() <= k && self.s_end > c {
                let (corner, _) = self.plan.profile(c);
                let (_, n1) = self.plan.profile(c - k);
                let (_, n2) = self.plan.profile(c + k);
                let center = corner - n1 * k - n2 * k;
                let theta = (s - (c - k)) / (2.0 * k) * std::f64::consts::FRAC_PI_2;
                let n = n1 * theta.cos() + n2 * theta.sin();
                out = Some((center + n * FOLD_RADIUS, n));
            }
        }
        let (p2, n2) = out.unwrap_or_else(|| {
            let (p, n) = self.plan.profile(s);
            (p + n * SHEET_THICKNESS, n)
        });
        let n = self.plan.lift_normal(&n2);
        let mut p = self.plan.lift(&p2, t);
        if let Some(b) = &self.bump {
            let r = (Vector2::new(s, t) - b.center).norm();
            if r < b.radius {
                p += n * (b.amplitude * 0.5 * (1.0 + (std::f64::consts::PI * r / b.radius).cos()));
            }
        }
        (p, n)
    }

    /// Whether a box surface point lies under the sheet.
    pub fn hides(&self, p: &Vec3) -> bool {
        let Some((s, t)) = strip_coord(&self.plan, p) else { return false };
        s <= self.s_end && t >= self.plan.lateral.0 && t <= self.plan.lateral.1
    }
}

/// Strip coordinates of a point on (or near) the target surface, for points
/// on the faces the strip runs over.
pub(crate) fn strip_coord(plan: &CoverPlan<f64>, p: &Vec3) -> Option<(f64, f64)> {
    let (e, l) = plan.local_axes();
    let local = plan.target.pose.inverse_transform_point(p);
    let half = plan.target.half_size();
    let he = half.dot(&e.abs());
    let hz = half.z;
    let (face, _) = plan.target.nearest_face(p);
    let ec = local.dot(&e);
    let t = local.dot(&l);
    let h = plan.target.size.z;
    let d = 2.0 * he;
    let s = if face == plan.entry {
        local.z + hz
    } else if face == crate::geometry::Face::Abcd {
        h + he - ec
    } else if face == plan.entry.opposite() {
        h + d + hz - local.z
    } else {
        return None;
    };
    Some((s, t))
}

pub(crate) enum Shape {
    /// `origin + a u + b v` for `a, b` in `[0, 1]`; normal along `u x v`.
    Quad { origin: Vec3, u: Vec3, v: Vec3 },
    /// Horizontal disk facing up.
    Disk { center: Vec3, radius: f64 },
    /// Vertical cylinder side above `base`.
    CylinderSide { base: Vec3, radius: f64, height: f64 },
    Drape(Drape),
}

pub(crate) struct Part {
    pub shape: Shape,
    pub label: Label,
    pub color: Rgb,
    /// A sample is dropped when any mask returns true.
    pub masks: Vec<Mask>,
}

impl Part {
    pub fn new(shape: Shape, label: Label, color: Rgb) -> Self {
        Self { shape, label, color, masks: Vec::new() }
    }

    pub fn mask(mut self, m: Mask) -> Self {
        self.masks.push(m);
        self
    }

    /// Calls `emit(point, normal)` for samples spaced about `spacing` apart.
    /// With `rng` the grid is jittered, otherwise samples sit at cell centers.
    pub fn sample(&self, spacing: f64, mut rng: Option<&mut ChaCha8Rng>, emit: &mut dyn FnMut(Vec3, Vec3)) {
        let jitter = |rng: &mut Option<&mut ChaCha8Rng>| match rng {
            Some(r) => (r.random::<f64>(), r.random::<f64>()),
            None => (0.5, 0.5),
        };
        let visible = |p: &Vec3| !self.masks.iter().any(|m| m(p));
        match &self.shape {
            Shape::Quad { origin, u, v } => {
                let n = u.cross(v).normalize();
                let (na, nb) = (cells(u.norm(), spacing), cells(v.norm(), spacing));
                for i in 0..na {
                    for j in 0..nb {
                        let (ja, jb) = jitter(&mut rng);
                        let p = origin + u * ((i as f64 + ja) / na as f64) + v * ((j as f64 + jb) / nb as f64);
                        if visible(&p) {
                            emit(p, n);
                        }
                    }
                }
            }
            Shape::Disk { center, radius } => {
                let n = cells(2.0 * radius, spacing);
                let step = 2.0 * radius / n as f64;
                for i in 0..n {
                    for j in 0..n {
                        let (ja, jb) = jitter(&mut rng);
                        let dx = -radius + (i as f64 + ja) * step;
                        let dy = -radius + (j as f64 + jb) * step;
                        if dx * dx + dy * dy > radius * radius {
                            continue;
                        }
                        let p = center + Vec3::new(dx, dy, 0.0);
                        if visible(&p) {
                            emit(p, Vec3::z());
                        }
                    }
                }
            }
            Shape::CylinderSide { base, radius, height } => {
                let na = cells(std::f64::consts::TAU * radius, spacing);
                let nb = cells(*height, spacing);
                for i in 0..na {
                    for j in 0..nb {
                        let (ja, jb) = jitter(&mut rng);
                        let phi = std::f64::consts::TAU * (i as f64 + ja) / na as f64;
                        let n = Vec3::new(phi.cos(), phi.sin(), 0.0);
                        let p = base + n * *radius + Vec3::z() * (height * (j as f64 + jb) / nb as f64);
                        if visible(&p) {
                            emit(p, n);
                        }
                    }
                }
            }
            Shape::Drape(d) => {
                let (t0, t1) = d.plan.lateral;
                let (na, nb) = (cells(d.s_end, spacing), cells(t1 - t0, spacing));
                for i in 0..na {
                    for j in 0..nb {
                        let (ja, jb) = jitter(&mut rng);
                        let s = d.s_end * (i as f64 + ja) / na as f64;
                        let t = t0 + (t1 - t0) * (j as f64 + jb) / nb as f64;
                        let (p, n) = d.point(s, t);
                        if visible(&p) {
                            emit(p, n);
                        }
                    }
                }
            }
        }
    }
}

fn cells(length: f64, spacing: f64) -> usize {
    ((length / spacing).ceil() as usize).max(1)
}
