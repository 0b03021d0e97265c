//! Point-cloud primitives: storage, color filtering, nearest neighbors,
//! normal estimation, plane extraction and rigid registration.

mod icp;
mod kdtree;
mod normals;
mod plane;

pub use icp::{icp_align, kabsch, IcpParams, IcpResult};
pub use kdtree::KdTree;
pub use normals::{estimate_normals, NormalParams, Orientation};
pub use plane::{extract_plane, Plane, RansacParams};

use nalgebra::{Isometry3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Rgb;
use crate::Real;

/// Rigid motion; `rotation` is a unit quaternion.
pub type RigidTransform<T> = Isometry3<T>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError<T: Real> {
    #[error("point cloud has no {0}")]
    MissingAttribute(&'static str),
    #[error("need at least {needed} points, cloud has {available}")]
    InsufficientPoints { needed: usize, available: usize },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("attribute length {got} does not match point count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("registration failed at iteration {iteration}: only {correspondences} correspondences")]
    RegistrationFailure {
        iteration: usize,
        correspondences: usize,
        last_transform: RigidTransform<T>,
    },
}

/// Points with optional parallel colors and normals.
///
/// A normal equal to the zero vector marks a point whose normal could not be
/// estimated; every other stored normal is unit length.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct PointCloud<T: Real> {
    pub points: Vec<Vector3<T>>,
    pub colors: Option<Vec<Rgb>>,
    pub normals: Option<Vec<Vector3<T>>>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<Vector3<T>>) -> Self {
        Self { points, colors: None, normals: None }
    }

    pub fn with_colors(points: Vec<Vector3<T>>, colors: Vec<Rgb>) -> Result<Self, CloudError<T>> {
        if colors.len() != points.len() {
            return Err(CloudError::LengthMismatch { expected: points.len(), got: colors.len() });
        }
        Ok(Self { points, colors: Some(colors), normals: None })
    }

    pub fn set_normals(&mut self, normals: Vec<Vector3<T>>) -> Result<(), CloudError<T>> {
        if normals.len() != self.points.len() {
            return Err(CloudError::LengthMismatch { expected: self.points.len(), got: normals.len() });
        }
        self.normals = Some(normals);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The normal of point `i`, if normals exist and this one is valid.
    pub fn normal(&self, i: usize) -> Option<Vector3<T>> {
        let n = self.normals.as_ref()?[i];
        (n != Vector3::zeros()).then_some(n)
    }

    pub fn push(&mut self, p: Vector3<T>, color: Option<Rgb>, normal: Option<Vector3<T>>) {
        self.points.push(p);
        if let (Some(cs), Some(c)) = (self.colors.as_mut(), color) {
            cs.push(c);
        }
        if let Some(ns) = self.normals.as_mut() {
            ns.push(normal.unwrap_or_else(Vector3::zeros));
        }
    }

    /// Appends another cloud; attributes present on only one side are dropped.
    pub fn extend(&mut self, other: &PointCloud<T>) {
        match (self.colors.as_mut(), other.colors.as_ref()) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            (Some(_), None) => self.colors = None,
            _ => {}
        }
        match (self.normals.as_mut(), other.normals.as_ref()) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            (Some(_), None) => self.normals = None,
            _ => {}
        }
        if self.points.is_empty() && self.colors.is_none() && self.normals.is_none() {
            self.colors = other.colors.clone();
            self.normals = other.normals.clone();
        }
        self.points.extend_from_slice(&other.points);
    }

    /// Cloud restricted to `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud<T> {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            colors: self.colors.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
            normals: self.normals.as_ref().map(|n| indices.iter().map(|&i| n[i]).collect()),
        }
    }

    /// Applies a rigid motion to points and rotates normals.
    pub fn transformed(&self, motion: &RigidTransform<T>) -> PointCloud<T> {
        PointCloud {
            points: self.points.iter().map(|p| motion.transform_point(&(*p).into()).coords).collect(),
            colors: self.colors.clone(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| motion.rotation * n).collect()),
        }
    }

    /// Indices of points whose color is within `tol` of `target` on every channel.
    pub fn color_matches(&self, target: Rgb, tol: u8) -> Result<Vec<usize>, CloudError<T>> {
        let colors = self.colors.as_ref().ok_or(CloudError::MissingAttribute("colors"))?;
        Ok(colors
            .iter()
            .enumerate()
            .filter(|(_, c)| c.max_channel_diff(&target) <= tol)
            .map(|(i, _)| i)
            .collect())
    }

    /// Subset whose max per-channel color difference to `target` is at most `tol`.
    pub fn filter_by_color(&self, target: Rgb, tol: u8) -> Result<PointCloud<T>, CloudError<T>> {
        Ok(self.select(&self.color_matches(target, tol)?))
    }

    pub fn centroid(&self) -> Result<Vector3<T>, CloudError<T>> {
        if self.points.is_empty() {
            return Err(CloudError::EmptyCloud);
        }
        let sum = self.points.iter().fold(Vector3::zeros(), |acc, p| acc + p);
        Ok(sum / T::from_usize_lossy(self.points.len()))
    }

    /// The `k` nearest points to `query`, ascending by distance, ties by index.
    pub fn knn(&self, query: &Vector3<T>, k: usize) -> Result<Vec<usize>, CloudError<T>> {
        let tree = KdTree::build(&self.points);
        tree.knn(query, k)
    }
}

/// Default color tolerance: 30 levels per channel.
pub const DEFAULT_COLOR_TOL: u8 = 30;

#[cfg(test)]
mod tests {
    use super::*;

    const RED: Rgb = Rgb::new(220, 20, 20);
    const BLUE: Rgb = Rgb::new(20, 20, 220);

    fn mixed() -> PointCloud<f64> {
        let pts = (0..10).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        let cols = (0..10).map(|i| if i % 3 == 0 { BLUE } else { RED }).collect();
        PointCloud::with_colors(pts, cols).unwrap()
    }

    #[test]
    fn filter_keeps_matching_in_order() {
        let c = mixed();
        let red = c.filter_by_color(RED, 10).unwrap();
        let xs: Vec<f64> = red.points.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![1.0, 2.0, 4.0, 5.0, 7.0, 8.0]);
        let all_red = PointCloud::with_colors(c.points.clone(), vec![RED; 10]).unwrap();
        assert_eq!(all_red.filter_by_color(RED, 10).unwrap(), all_red);
    }

    #[test]
    fn zero_tolerance_rejects_off_by_one() {
        let c = PointCloud::with_colors(vec![Vector3::<f64>::zeros()], vec![Rgb::new(221, 20, 20)]).unwrap();
        assert!(c.filter_by_color(RED, 0).unwrap().is_empty());
        assert_eq!(c.filter_by_color(RED, 1).unwrap().len(), 1);
    }

    #[test]
    fn colorless_cloud_errors() {
        let c = PointCloud::new(vec![Vector3::<f64>::zeros()]);
        assert_eq!(c.filter_by_color(RED, 10), Err(CloudError::MissingAttribute("colors")));
    }

    #[test]
    fn centroid_cases() {
        let c = PointCloud::new(vec![Vector3::new(1.0, 0.0, 0.0), Vector3::new(-1.0, 0.0, 0.0)]);
        assert_eq!(c.centroid().unwrap(), Vector3::zeros());
        let c = PointCloud::new(vec![Vector3::new(1.0, 2.0, 3.0)]);
        assert_eq!(c.centroid().unwrap(), Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(PointCloud::<f64>::new(vec![]).centroid(), Err(CloudError::EmptyCloud));
    }

    #[test]
    fn centroid_matches_streaming_mean() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vector3<f64>> =
            (0..100).map(|_| Vector3::new(rng.random(), rng.random(), rng.random())).collect();
        // Welford running mean, independent of the summation path above.
        let mut mean = Vector3::zeros();
        for (i, p) in pts.iter().enumerate() {
            mean += (p - mean) / (i as f64 + 1.0);
        }
        let c = PointCloud::new(pts).centroid().unwrap();
        assert!((c - mean).amax() < 1e-12);
    }

    #[test]
    fn color_filter_partitions() {
        let c = mixed();
        let keep = c.color_matches(RED, 10).unwrap();
        let drop: Vec<usize> = (0..c.len()).filter(|i| !keep.contains(i)).collect();
        let mut all: Vec<usize> = keep.iter().chain(drop.iter()).copied().collect();
        all.sort();
        assert_eq!(all, (0..c.len()).collect::<Vec<_>>());
    }
}
