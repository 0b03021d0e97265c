use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::FaceQuad;
use crate::Real;

/// Half of a face split by the robot's sagittal plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    RobotRight,
    RobotLeft,
}

/// Region of interest. All regions are closed: boundary points are inside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub enum Roi<T: Real> {
    Sphere { center: Vector3<T>, radius: T },
    /// Shell of half-thickness `thickness` around a face plane, bounded by the quad.
    Face { quad: FaceQuad<T>, thickness: T },
    /// A `Face` region cut by the plane through the face center with normal +y.
    HalfFace { quad: FaceQuad<T>, side: Side, thickness: T },
    Aabb { min: Vector3<T>, max: Vector3<T> },
}

impl<T: Real> Roi<T> {
    pub fn contains(&self, p: &Vector3<T>) -> bool {
        match self {
            Roi::Sphere { center, radius } => (p - center).norm_squared() <= *radius * *radius,
            Roi::Face { quad, thickness } => in_shell(quad, *thickness, p),
            Roi::HalfFace { quad, side, thickness } => {
                if !in_shell(quad, *thickness, p) {
                    return false;
                }
                let dy = p.y - quad.center().y;
                match side {
                    Side::RobotRight => dy <= T::ZERO,
                    Side::RobotLeft => dy >= T::ZERO,
                }
            }
            Roi::Aabb { min, max } => (0..3).all(|i| p[i] >= min[i] && p[i] <= max[i]),
        }
    }

    pub fn count_inside<'a, I>(&self, points: I) -> usize
    where
        I: IntoIterator<Item = &'a Vector3<T>>,
        T: 'a,
    {
        points.into_iter().filter(|p| self.contains(p)).count()
    }
}

fn in_shell<T: Real>(quad: &FaceQuad<T>, thickness: T, p: &Vector3<T>) -> bool {
    quad.signed_distance(p).abs() <= thickness && quad.projects_inside(p)
}
