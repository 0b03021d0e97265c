//! Robotic wrapping toolkit: object models, point-cloud recognition,
//! simulated two-hand control, step sequencing and wrap-quality evaluation.
//!
//! Geometry, point-cloud, recognition and evaluation code is generic over the
//! scalar type (`f32` or `f64`); simulation, synthesis and the pipeline run on
//! `f64`.

mod scalar;

pub mod cloud;
pub mod control;
pub mod evaluation;
pub mod geometry;
pub mod pipeline;
pub mod recognition;
pub mod synth;

pub use scalar::Real;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Pose64 = geometry::Pose<f64>;
pub type OrientedBox64 = geometry::OrientedBox<f64>;
pub type ColoredBBox64 = geometry::ColoredBBox<f64>;
pub type SealCmp64 = geometry::SealCmp<f64>;
pub type Roi64 = geometry::Roi<f64>;
pub type PointCloud64 = cloud::PointCloud<f64>;
pub type PointCloud32 = cloud::PointCloud<f32>;
pub type EvalReport64 = evaluation::EvalReport<f64>;
