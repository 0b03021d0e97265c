use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::{CloudError, KdTree, PointCloud};
use crate::Real;

/// How the sign of an estimated normal is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub enum Orientation<T: Real> {
    /// Normal points toward the viewpoint.
    TowardViewpoint(Vector3<T>),
    /// Normal points away from the given point (e.g. an object center).
    AwayFrom(Vector3<T>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct NormalParams<T: Real> {
    pub k: usize,
    pub orientation: Orientation<T>,
}

impl<T: Real> Default for NormalParams<T> {
    fn default() -> Self {
        Self {
            k: 10,
            orientation: Orientation::TowardViewpoint(Vector3::new(T::ZERO, T::ZERO, T::lit(10.0))),
        }
    }
}

/// Ratio below which the middle eigenvalue counts as zero (neighborhood of rank < 2).
const RANK_EPS: f64 = 1e-10;

/// Per-point PCA normals over the `k` nearest neighbors (the point included).
/// Points whose neighborhood is degenerate get the zero vector.
pub fn estimate_normals<T: Real>(
    cloud: &PointCloud<T>,
    params: &NormalParams<T>,
) -> Result<PointCloud<T>, CloudError<T>> {
    let k = params.k;
    if k < 3 {
        return Err(CloudError::DegenerateInput("normal estimation needs k >= 3"));
    }
    if cloud.len() < k {
        return Err(CloudError::InsufficientPoints { needed: k, available: cloud.len() });
    }
    let tree = KdTree::build(&cloud.points);
    let mut normals = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        let nbrs = tree.knn(p, k)?;
        let n = pca_normal(nbrs.iter().map(|&i| &cloud.points[i]))
            .map(|n| orient(n, p, &params.orientation))
            .unwrap_or_else(Vector3::zeros);
        normals.push(n);
    }
    let mut out = cloud.clone();
    out.normals = Some(normals);
    Ok(out)
}

/// Smallest-eigenvalue eigenvector of the neighborhood covariance, or `None`
/// when the neighborhood has rank < 2.
pub(crate) fn pca_normal<'a, T: Real, I>(points: I) -> Option<Vector3<T>>
where
    I: Iterator<Item = &'a Vector3<T>> + Clone,
{
    let mut n = 0usize;
    let mut mean = Vector3::zeros();
    for p in points.clone() {
        mean += p;
        n += 1;
    }
    if n < 3 {
        return None;
    }
    mean /= T::from_usize_lossy(n);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp_finite(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[order[2]];
    let middle = eig.eigenvalues[order[1]];
    if largest <= T::ZERO || middle <= largest * T::lit(RANK_EPS) {
        return None;
    }
    eig.eigenvectors.column(order[0]).into_owned().try_normalize(T::default_epsilon())
}

fn orient<T: Real>(n: Vector3<T>, p: &Vector3<T>, orientation: &Orientation<T>) -> Vector3<T> {
    let flip = match orientation {
        Orientation::TowardViewpoint(v) => n.dot(&(v - p)) < T::ZERO,
        Orientation::AwayFrom(c) => n.dot(&(p - c)) < T::ZERO,
    };
    if flip {
        -n
    } else {
        n
    }
}
