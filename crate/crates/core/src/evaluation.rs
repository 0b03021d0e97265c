//! Wrapping-quality metric: the fraction `r` of post-wrap points whose normal
//! deviates from the locally averaged pre-wrap normal by at least a threshold.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{estimate_normals, icp_align, CloudError, IcpParams, KdTree, NormalParams, PointCloud};
use crate::Real;

/// Decision threshold on `r`: below is a good wrap.
pub const GOOD_R_THRESHOLD: f64 = 0.30;

/// How normal sign ambiguity is handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleMode {
    /// Neighbor normals are flipped into the hemisphere of the reference
    /// normal before averaging and the angle uses `|cos|`.
    #[default]
    Unsigned,
    /// Normals are used exactly as oriented.
    Signed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct EvalParams<T: Real> {
    pub k: usize,
    /// Degrees.
    pub angle_thresh: T,
    pub icp: IcpParams<T>,
    pub mode: AngleMode,
}

impl<T: Real> Default for EvalParams<T> {
    fn default() -> Self {
        Self { k: 10, angle_thresh: T::lit(10.0), icp: IcpParams::default(), mode: AngleMode::Unsigned }
    }
}

impl<T: Real> EvalParams<T> {
    pub fn validate(&self) -> Result<(), EvalError<T>> {
        let ok = self.k >= 1 && self.angle_thresh > T::ZERO && self.angle_thresh < T::lit(180.0);
        if ok {
            Ok(())
        } else {
            Err(EvalError::InvalidParams)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct EvalReport<T: Real> {
    pub r: T,
    /// Number of post points that entered the ratio.
    pub m: usize,
    pub deviated: usize,
    /// Post-cloud index and angle in degrees for every counted point.
    pub angles: Vec<(usize, T)>,
    pub icp_rmse: T,
    pub skipped: usize,
}

impl<T: Real> EvalReport<T> {
    pub fn is_good(&self, threshold: T) -> bool {
        self.r < threshold
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError<T: Real> {
    #[error("evaluation parameters out of range")]
    InvalidParams,
    #[error(transparent)]
    Cloud(#[from] CloudError<T>),
    #[error("no post point has a valid normal neighborhood")]
    NoValidPoints,
}

/// Computes the wrapping-quality ratio between the pre-wrap cloud `pre` (A)
/// and the post-wrap cloud `post` (B).
///
/// `post` is registered onto `pre` with ICP. Missing normals are estimated
/// with PCA over `k` neighbors; estimated post normals are additionally
/// averaged over their own `k` nearest post points, the same averaging that
/// is applied to the pre normals around every post point. Both averages
/// orient their terms against the unsmoothed post normal.
pub fn wrap_quality_r<T: Real>(
    pre: &PointCloud<T>,
    post: &PointCloud<T>,
    params: &EvalParams<T>,
) -> Result<EvalReport<T>, EvalError<T>> {
    params.validate()?;
    let k = params.k;
    for c in [pre, post] {
        if c.len() < k.max(3) {
            return Err(CloudError::InsufficientPoints { needed: k.max(3), available: c.len() }.into());
        }
    }
    let normal_params = NormalParams { k: k.max(3), ..NormalParams::default() };
    let a = match pre.normals {
        Some(_) => pre.clone(),
        None => estimate_normals(pre, &normal_params)?,
    };
    let (b, b_raw) = match post.normals {
        Some(_) => (post.clone(), post.clone()),
        None => {
            let raw = estimate_normals(post, &normal_params)?;
            (smoothed(&raw, k, params.mode)?, raw)
        }
    };

    let icp = icp_align(&a, &b, &params.icp)?;
    let b = b.transformed(&icp.transform);
    let b_raw = b_raw.transformed(&icp.transform);
    let a_normals = a.normals.as_ref().expect("normals present");
    let b_normals = b.normals.as_ref().expect("normals present");
    let raw_normals = b_raw.normals.as_ref().expect("normals present");

    let tree = KdTree::build(&a.points);
    let thresh = params.angle_thresh;
    let mut angles = Vec::with_capacity(b.len());
    let mut deviated = 0usize;
    let mut skipped = 0usize;
    for (i, p) in b.points.iter().enumerate() {
        let nb = b_normals[i];
        let avg = if nb == Vector3::zeros() {
            None
        } else {
            neighborhood_mean(&tree.knn(p, k)?, a_normals, &raw_normals[i], params.mode)
        };
        let Some(avg) = avg else {
            skipped += 1;
            continue;
        };
        let angle = angle_deg(&avg, &nb, params.mode);
        if angle >= thresh {
            deviated += 1;
        }
        angles.push((i, angle));
    }
    if skipped > 0 {
        log::debug!("{skipped} post points skipped: invalid normal neighborhood");
    }
    let m = angles.len();
    if m == 0 {
        return Err(EvalError::NoValidPoints);
    }
    Ok(EvalReport {
        r: T::from_usize_lossy(deviated) / T::from_usize_lossy(m),
        m,
        deviated,
        angles,
        icp_rmse: icp.rmse,
        skipped,
    })
}

/// Mean of the normals at `indices`, unit length. `None` when any of them is
/// invalid or the mean cancels out.
fn neighborhood_mean<T: Real>(
    indices: &[usize],
    normals: &[Vector3<T>],
    reference: &Vector3<T>,
    mode: AngleMode,
) -> Option<Vector3<T>> {
    let mut sum = Vector3::zeros();
    for &j in indices {
        let n = normals[j];
        if n == Vector3::zeros() {
            return None;
        }
        if mode == AngleMode::Unsigned && n.dot(reference) < T::ZERO {
            sum -= n;
        } else {
            sum += n;
        }
    }
    sum.try_normalize(T::lit(1e-12))
}

fn smoothed<T: Real>(cloud: &PointCloud<T>, k: usize, mode: AngleMode) -> Result<PointCloud<T>, CloudError<T>> {
    let normals = cloud.normals.as_ref().expect("normals present");
    let tree = KdTree::build(&cloud.points);
    let mut out = Vec::with_capacity(cloud.len());
    for (i, p) in cloud.points.iter().enumerate() {
        let own = normals[i];
        let n = if own == Vector3::zeros() {
            None
        } else {
            neighborhood_mean(&tree.knn(p, k)?, normals, &own, mode)
        };
        out.push(n.unwrap_or_else(Vector3::zeros));
    }
    let mut c = cloud.clone();
    c.normals = Some(out);
    Ok(c)
}

fn angle_deg<T: Real>(a: &Vector3<T>, b: &Vector3<T>, mode: AngleMode) -> T {
    let denom = a.norm() * b.norm();
    let mut cos = a.dot(b) / denom;
    if mode == AngleMode::Unsigned {
        cos = cos.abs();
    }
    crate::scalar::deg(cos.clamp(-T::ONE, T::ONE).acos())
}
