//! Recognition: object models from clouds and images, covered-surface
//! prediction, edge-similarity matching and seal normals.

mod covered;
mod edges;
mod image;
mod target;
mod wrapper;

pub use covered::{covered_cloud_for_faces, predict_covered_cloud, CoverShell};
pub use edges::{detect_edges, detect_edges_with, recog_seal_target, update_poses, EdgeParams, PoseUpdate, UpdateEdge};
pub use image::SceneImage;
pub use target::{recog_target_bbox, TargetAnnotations, TargetModel};
pub use wrapper::{recog_wrapper_cbbox, wrapper_corners_px};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{CloudError, PointCloud};
use crate::geometry::{EdgeSegment, Rgb, SealCmp};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecogError {
    #[error("image buffers do not match {expected} pixels (rgb {rgb}, lookup {lookup})")]
    ImageSize { expected: usize, rgb: usize, lookup: usize },
    #[error("{0} not found")]
    NotFound(&'static str),
    #[error("no 3D point behind corner pixels {0:?}")]
    LiftFailure(Vec<(usize, usize)>),
    #[error("wrapper footprint does not reach the target")]
    EmptyPrediction,
    #[error("no candidate edges")]
    EmptyInput,
    #[error("recognition failed: {0}")]
    RecognitionFailure(&'static str),
    #[error("normals cancel out")]
    DegenerateNormal,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("{0}")]
    Cloud(String),
}

impl<T: Real> From<CloudError<T>> for RecogError {
    fn from(e: CloudError<T>) -> Self {
        RecogError::Cloud(e.to_string())
    }
}

/// A straight edge summarized by center, length and unit direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct EdgeDescriptor<T: Real> {
    pub center: Vector3<T>,
    pub length: T,
    pub direction: Vector3<T>,
}

impl<T: Real> EdgeDescriptor<T> {
    pub fn from_endpoints(p: &Vector3<T>, q: &Vector3<T>) -> Option<Self> {
        let d = q - p;
        let length = d.norm();
        let direction = d.try_normalize(T::default_epsilon())?;
        Some(Self { center: (p + q) * T::HALF, length, direction })
    }

    pub fn from_segment(seg: &EdgeSegment<T>) -> Option<Self> {
        Self::from_endpoints(&seg.endpoints[0], &seg.endpoints[1])
    }

    /// Position, length and direction differences to `model`.
    pub fn differences(&self, model: &EdgeDescriptor<T>) -> (T, T, T) {
        let dp = (self.center - model.center).norm();
        let dl = (self.length - model.length).abs();
        let cos = self.direction.dot(&model.direction) / (self.direction.norm() * model.direction.norm());
        let dv = T::ONE - cos.abs().min(T::ONE);
        (dp, dl, dv)
    }
}

/// Weights of the position, length and direction terms of the edge
/// similarity. Position and length weights apply to meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct SimilarityWeights<T: Real> {
    pub w_p: T,
    pub w_l: T,
    pub w_v: T,
}

impl<T: Real> Default for SimilarityWeights<T> {
    fn default() -> Self {
        Self { w_p: T::TWO, w_l: T::lit(3.0), w_v: T::ONE }
    }
}

impl<T: Real> SimilarityWeights<T> {
    pub fn validate(&self) -> Result<(), RecogError> {
        let w = [self.w_p, self.w_l, self.w_v];
        if w.iter().any(|x| !x.is_finite() || *x < T::ZERO) || w.iter().all(|x| *x == T::ZERO) {
            return Err(RecogError::InvalidArgument("weights must be nonnegative and not all zero"));
        }
        Ok(())
    }

    /// `S = w_P D_P + w_L D_L + w_V D_V`.
    pub fn score(&self, dp: T, dl: T, dv: T) -> T {
        self.w_p * dp + self.w_l * dl + self.w_v * dv
    }
}

/// Scores every candidate against `model` and returns the index of the
/// smallest score (lowest index on ties) with all scores.
pub fn match_edge<T: Real>(
    candidates: &[EdgeDescriptor<T>],
    model: &EdgeDescriptor<T>,
    w: &SimilarityWeights<T>,
) -> Result<(usize, Vec<T>), RecogError> {
    w.validate()?;
    if candidates.is_empty() {
        return Err(RecogError::EmptyInput);
    }
    let scores: Vec<T> = candidates
        .iter()
        .map(|c| {
            let (dp, dl, dv) = c.differences(model);
            w.score(dp, dl, dv)
        })
        .collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    Ok((best, scores))
}

/// Seal summary from the mean of its color-extracted points.
pub fn recog_seal_cmp<T: Real>(cloud: &PointCloud<T>, seal_color: Rgb, tol: u8) -> Result<SealCmp<T>, RecogError> {
    let seal = cloud.filter_by_color(seal_color, tol)?;
    if seal.is_empty() {
        return Err(RecogError::NotFound("seal"));
    }
    Ok(SealCmp { color: seal_color, mean_point: seal.centroid()? })
}

/// Mean of the valid normals of the points within `thre` of `pos`, unit length.
pub fn seal_normal<T: Real>(cloud: &PointCloud<T>, pos: &Vector3<T>, thre: T) -> Result<Vector3<T>, RecogError> {
    if !(thre > T::ZERO) {
        return Err(RecogError::InvalidArgument("threshold must be positive"));
    }
    let normals = cloud.normals.as_ref().ok_or(RecogError::Cloud("point cloud has no normals".into()))?;
    let r2 = thre * thre;
    let mut sum = Vector3::zeros();
    let mut count = 0usize;
    for (p, n) in cloud.points.iter().zip(normals) {
        if (p - pos).norm_squared() <= r2 && *n != Vector3::zeros() {
            sum += n;
            count += 1;
        }
    }
    if count == 0 {
        return Err(RecogError::NotFound("points near the seal position"));
    }
    let mean = sum / T::from_usize_lossy(count);
    if mean.norm() < T::lit(1e-6) {
        return Err(RecogError::DegenerateNormal);
    }
    Ok(mean.normalize())
}
