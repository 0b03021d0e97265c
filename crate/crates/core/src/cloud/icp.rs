use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{CloudError, KdTree, PointCloud, RigidTransform};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct IcpParams<T: Real> {
    pub max_iter: usize,
    /// Correspondences farther apart than this are ignored.
    pub corr_dist: T,
    /// Convergence threshold on the change of RMSE between iterations.
    pub tol: T,
}

impl<T: Real> Default for IcpParams<T> {
    fn default() -> Self {
        Self { max_iter: 50, corr_dist: T::lit(0.05), tol: T::lit(1e-7) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct IcpResult<T: Real> {
    /// Maps the moving cloud `B` onto the fixed cloud `A`.
    pub transform: RigidTransform<T>,
    pub rmse: T,
    pub iterations: usize,
}

/// Least-squares rigid motion taking `src[i]` onto `dst[i]`.
pub fn kabsch<T: Real>(src: &[Vector3<T>], dst: &[Vector3<T>]) -> Option<RigidTransform<T>> {
    if src.len() != dst.len() || src.is_empty() {
        return None;
    }
    let n = T::from_usize_lossy(src.len());
    let cs = src.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let cd = dst.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - cs) * (d - cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u?;
    let v = svd.v_t?.transpose();
    let mut fix = Matrix3::identity();
    if (v * u.transpose()).determinant() < T::ZERO {
        fix[(2, 2)] = -T::ONE;
    }
    let r = v * fix * u.transpose();
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let t = cd - rot * cs;
    Some(Isometry3::from_parts(Translation3::from(t), rot))
}

/// Point-to-point ICP aligning `moving` (B) onto `fixed` (A).
pub fn icp_align<T: Real>(
    fixed: &PointCloud<T>,
    moving: &PointCloud<T>,
    params: &IcpParams<T>,
) -> Result<IcpResult<T>, CloudError<T>> {
    for c in [fixed, moving] {
        if c.len() < 3 {
            return Err(CloudError::InsufficientPoints { needed: 3, available: c.len() });
        }
    }
    let tree = KdTree::build(&fixed.points);
    let max_d2 = params.corr_dist * params.corr_dist;
    let mut current: RigidTransform<T> = Isometry3::identity();
    let mut best: Option<(RigidTransform<T>, T)> = None;
    let mut prev_rmse: Option<T> = None;
    let mut src = Vec::with_capacity(moving.len());
    let mut dst = Vec::with_capacity(moving.len());

    for iteration in 1..=params.max_iter.max(1) {
        src.clear();
        dst.clear();
        let mut sum = T::ZERO;
        for p in &moving.points {
            let q = current * nalgebra::Point3::from(*p);
            if let Some((j, d2)) = tree.nearest(&q.coords) {
                if d2 <= max_d2 {
                    src.push(q.coords);
                    dst.push(fixed.points[j]);
                    sum += d2;
                }
            }
        }
        if src.len() < 3 {
            return Err(CloudError::RegistrationFailure {
                iteration,
                correspondences: src.len(),
                last_transform: current,
            });
        }
        let rmse = (sum / T::from_usize_lossy(src.len())).sqrt();
        if best.as_ref().is_none_or(|(_, b)| rmse < *b) {
            best = Some((current, rmse));
        }
        let converged = rmse <= params.tol || prev_rmse.is_some_and(|p| (p - rmse).abs() < params.tol);
        if converged || iteration == params.max_iter.max(1) {
            let (transform, rmse) = best.expect("at least one iteration evaluated");
            return Ok(IcpResult { transform, rmse, iterations: iteration });
        }
        let step = kabsch(&src, &dst).ok_or(CloudError::RegistrationFailure {
            iteration,
            correspondences: src.len(),
            last_transform: current,
        })?;
        current = step * current;
        prev_rmse = Some(rmse);
    }
    unreachable!("loop returns on its final iteration")
}
