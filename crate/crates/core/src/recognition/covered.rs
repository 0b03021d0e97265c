use serde::{Deserialize, Serialize};

use super::RecogError;
use crate::cloud::PointCloud;
use crate::geometry::{ColoredBBox, CoverPlan, Face, OrientedBox};
use crate::Real;

/// Shell around the box surface that counts as a face's region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct CoverShell<T: Real> {
    /// Maximum distance outside the face plane.
    pub outer: T,
    /// Maximum depth inside the face plane.
    pub inner: T,
    /// Points closer than this to the bottom plane are dropped unless the
    /// bottom face is requested.
    pub bottom_clearance: T,
}

impl<T: Real> Default for CoverShell<T> {
    fn default() -> Self {
        Self { outer: T::lit(0.05), inner: T::lit(0.01), bottom_clearance: T::lit(0.005) }
    }
}

/// Points of `cloud` on the target surface that the wrapper covers when its
/// `W_ab` end is folded over the box.
pub fn predict_covered_cloud<T: Real>(
    cloud: &PointCloud<T>,
    target: &OrientedBox<T>,
    wrapper: &ColoredBBox<T>,
) -> Result<PointCloud<T>, RecogError> {
    let plan = CoverPlan::new(target, wrapper).ok_or(RecogError::EmptyPrediction)?;
    Ok(covered_cloud_for_faces(cloud, target, &plan.faces(), &CoverShell::default()))
}

/// Points whose nearest box face is one of `faces` and that lie within the
/// shell around it. Order is preserved.
pub fn covered_cloud_for_faces<T: Real>(
    cloud: &PointCloud<T>,
    target: &OrientedBox<T>,
    faces: &[Face],
    shell: &CoverShell<T>,
) -> PointCloud<T> {
    let half = target.half_size();
    let keep_bottom = faces.contains(&Face::Efgh);
    let idx: Vec<usize> = cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let local = target.pose.inverse_transform_point(p);
            let (face, d) = target.nearest_face(p);
            faces.contains(&face)
                && d <= shell.outer
                && d >= -shell.inner
                && (keep_bottom || local.z >= -half.z + shell.bottom_clearance)
        })
        .map(|(i, _)| i)
        .collect();
    cloud.select(&idx)
}
