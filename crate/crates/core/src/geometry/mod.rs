//! Geometric object models: poses, the labeled target box, the flat wrapper
//! rectangle, the seal summary and the regions of interest used by judges.
//!
//! Frame convention: x points forward away from the robot, y to the robot's
//! left, z up. The robot-right side of the target is therefore the -y side.

mod bbox;
mod cover;
mod roi;
mod wrapper;

pub use bbox::{Edge, EdgeSegment, Face, FaceQuad, OrientedBox, Vertex};
pub use cover::{CoverPlan, StripPiece};
pub use roi::{Roi, Side};
pub use wrapper::{ColoredBBox, SealCmp};

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid label `{0}`")]
    InvalidLabel(String),
    #[error("dimensions must be finite and strictly positive, got {0}")]
    InvalidSize(String),
    #[error("pose is not finite")]
    NonFinitePose,
}

/// 8-bit RGB color.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb([r, g, b])
    }

    /// Chebyshev (max per-channel) distance.
    pub fn max_channel_diff(&self, other: &Rgb) -> u8 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.abs_diff(*b))
            .max()
            .unwrap_or(0)
    }

    pub fn luma(&self) -> u8 {
        let [r, g, b] = self.0;
        ((299 * r as u32 + 587 * g as u32 + 114 * b as u32) / 1000) as u8
    }
}

/// Position plus unit-quaternion orientation of an object's center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct Pose<T: Real> {
    pub position: Vector3<T>,
    pub orientation: UnitQuaternion<T>,
}

impl<T: Real> Pose<T> {
    pub fn new(position: Vector3<T>, orientation: UnitQuaternion<T>) -> Self {
        Self { position, orientation }
    }

    pub fn identity() -> Self {
        Self::new(Vector3::zeros(), UnitQuaternion::identity())
    }

    pub fn from_position(position: Vector3<T>) -> Self {
        Self::new(position, UnitQuaternion::identity())
    }

    /// Pose rotated by `yaw` radians about +z.
    pub fn from_yaw(position: Vector3<T>, yaw: T) -> Self {
        Self::new(position, UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw))
    }

    pub fn yaw(&self) -> T {
        let x = self.orientation * Vector3::x();
        x.y.atan2(x.x)
    }

    pub fn to_isometry(&self) -> Isometry3<T> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    pub fn from_isometry(iso: &Isometry3<T>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    /// Maps a point from the local frame into the world frame.
    pub fn transform_point(&self, local: &Vector3<T>) -> Vector3<T> {
        self.orientation * local + self.position
    }

    pub fn transform_vector(&self, local: &Vector3<T>) -> Vector3<T> {
        self.orientation * local
    }

    /// Maps a world point into the local frame.
    pub fn inverse_transform_point(&self, world: &Vector3<T>) -> Vector3<T> {
        self.orientation.inverse() * (world - self.position)
    }

    /// Applies a world-frame rigid motion to this pose.
    pub fn transformed(&self, motion: &Isometry3<T>) -> Self {
        Self::from_isometry(&(motion * self.to_isometry()))
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.orientation.coords.iter().all(|v| v.is_finite())
    }
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

pub(crate) fn check_positive<T: Real>(values: &[T]) -> Result<(), GeometryError> {
    if values.iter().all(|v| v.is_finite() && *v > T::ZERO) {
        Ok(())
    } else {
        Err(GeometryError::InvalidSize(format!(
            "{:?}",
            values.iter().map(|v| v.as_f64()).collect::<Vec<_>>()
        )))
    }
}
