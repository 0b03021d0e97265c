use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::image::{components, split_and_merge, trace_boundary, SceneImage};
use super::{match_edge, EdgeDescriptor, RecogError, SimilarityWeights};
use crate::geometry::{ColoredBBox, CoverPlan, OrientedBox, Pose};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    /// Maximum contour deviation from a fitted segment, pixels.
    pub max_deviation_px: f64,
    /// Shortest kept segment in 3D, meters.
    pub min_length: f64,
    /// Largest depth step inside one region, meters.
    pub depth_tol: f64,
    /// Smallest region considered, pixels.
    pub min_region_px: usize,
}

impl Default for EdgeParams {
    fn default() -> Self {
        Self { max_deviation_px: 2.0, min_length: 0.02, depth_tol: 0.005, min_region_px: 20 }
    }
}

/// Straight boundary segments of the color regions in `scene`, lifted to 3D.
pub fn detect_edges<T: Real>(scene: &SceneImage<T>) -> Vec<EdgeDescriptor<T>> {
    detect_edges_with(scene, &EdgeParams::default())
}

/// Regions are 4-connected pixels of one color with continuous depth;
/// regions touching the image border are background and skipped. Each
/// region's outer contour is approximated by split-and-merge and every
/// polygon side becomes one descriptor.
pub fn detect_edges_with<T: Real>(scene: &SceneImage<T>, params: &EdgeParams) -> Vec<EdgeDescriptor<T>> {
    let (comps, label) = components(scene, T::lit(params.depth_tol));
    let mut out = Vec::new();
    for (id, comp) in comps.iter().enumerate() {
        if comp.touches_border || comp.pixels.len() < params.min_region_px {
            continue;
        }
        let start = *comp.pixels.iter().min_by_key(|&&(x, y)| (y, x)).expect("nonempty region");
        let contour = trace_boundary(&label, scene.width, scene.height, id as u32, start);
        let verts = split_and_merge(&contour, params.max_deviation_px);
        if verts.len() < 2 {
            continue;
        }
        for j in 0..verts.len() {
            let (x0, y0) = contour[verts[j]];
            let (x1, y1) = contour[verts[(j + 1) % verts.len()]];
            let (Some(p), Some(q)) = (scene.point(x0, y0), scene.point(x1, y1)) else { continue };
            if let Some(e) = EdgeDescriptor::from_endpoints(&p, &q) {
                if e.length >= T::lit(params.min_length) {
                    out.push(e);
                }
            }
        }
    }
    out
}

/// Seal position: the center of the detected edge most similar to the
/// predicted free edge of the wrapper after covering.
pub fn recog_seal_target<T: Real>(
    scene: &SceneImage<T>,
    target: &OrientedBox<T>,
    wrapper: &ColoredBBox<T>,
    w: &SimilarityWeights<T>,
) -> Result<(Vector3<T>, EdgeDescriptor<T>), RecogError> {
    let plan = CoverPlan::new(target, wrapper).ok_or(RecogError::EmptyPrediction)?;
    let model = EdgeDescriptor::from_segment(&plan.free_edge()).ok_or(RecogError::EmptyPrediction)?;
    let candidates = detect_edges(scene);
    if candidates.is_empty() {
        return Err(RecogError::RecognitionFailure("no edges detected"));
    }
    let (best, _) = match_edge(&candidates, &model, w)?;
    Ok((candidates[best].center, candidates[best]))
}

/// Which predicted edge the pose refresh tracks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateEdge {
    /// The wrapper's far short edge `W_cd`, still flat on the table.
    #[default]
    WrapperCd,
    /// The wrapper's free edge on the target after covering.
    WrapperFold,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct PoseUpdate<T: Real> {
    pub target: Pose<T>,
    pub wrapper: Pose<T>,
    /// In-plane translation applied.
    pub offset: Vector3<T>,
    /// Rotation about the vertical applied, radians.
    pub yaw: T,
    /// True when no edge could be matched and the poses are unchanged.
    pub stale: bool,
}

/// Re-estimates the target and wrapper poses from one matched edge: the
/// planar offset and yaw between the predicted and the detected edge are
/// applied rigidly to both.
pub fn update_poses<T: Real>(
    scene: &SceneImage<T>,
    target: &OrientedBox<T>,
    wrapper: &ColoredBBox<T>,
    w: &SimilarityWeights<T>,
    which: UpdateEdge,
) -> PoseUpdate<T> {
    let unchanged = PoseUpdate {
        target: target.pose,
        wrapper: wrapper.pose,
        offset: Vector3::zeros(),
        yaw: T::ZERO,
        stale: true,
    };
    let model = match which {
        UpdateEdge::WrapperCd => wrapper.edge_by_label("cd").ok(),
        UpdateEdge::WrapperFold => CoverPlan::new(target, wrapper).map(|p| p.free_edge()),
    }
    .and_then(|seg| EdgeDescriptor::from_segment(&seg));
    let Some(model) = model else { return unchanged };
    let candidates = detect_edges(scene);
    let Ok((best, _)) = match_edge(&candidates, &model, w) else { return unchanged };
    let found = candidates[best];

    let mut dir = found.direction;
    if dir.dot(&model.direction) < T::ZERO {
        dir = -dir;
    }
    let mut yaw = dir.y.atan2(dir.x) - model.direction.y.atan2(model.direction.x);
    while yaw > T::pi() {
        yaw -= T::two_pi();
    }
    while yaw <= -T::pi() {
        yaw += T::two_pi();
    }
    let mut offset = found.center - model.center;
    offset.z = T::ZERO;
    let pivot = model.center;
    let motion = Isometry3::from_parts(Translation3::from(pivot + offset), UnitQuaternion::from_euler_angles(T::ZERO, T::ZERO, yaw))
        * Isometry3::from_parts(Translation3::from(-pivot), UnitQuaternion::identity());
    PoseUpdate {
        target: target.pose.transformed(&motion),
        wrapper: wrapper.pose.transformed(&motion),
        offset,
        yaw,
        stale: false,
    }
}
