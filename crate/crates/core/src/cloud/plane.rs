use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::normals::pca_normal;
use super::{CloudError, PointCloud};
use crate::Real;

/// Plane `normal . p = offset` with unit normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct Plane<T: Real> {
    pub normal: Vector3<T>,
    pub offset: T,
}

impl<T: Real> Plane<T> {
    /// Plane through three points; `None` if they are collinear.
    pub fn from_points(a: &Vector3<T>, b: &Vector3<T>, c: &Vector3<T>) -> Option<Self> {
        let n = (b - a).cross(&(c - a));
        let scale = (b - a).norm() * (c - a).norm();
        if scale <= T::ZERO || n.norm() <= scale * T::lit(1e-9) {
            return None;
        }
        let normal = n.normalize();
        Some(Self { normal, offset: normal.dot(a) })
    }

    pub fn from_point_normal(point: &Vector3<T>, normal: &Vector3<T>) -> Self {
        let normal = normal.normalize();
        Self { normal, offset: normal.dot(point) }
    }

    pub fn signed_distance(&self, p: &Vector3<T>) -> T {
        self.normal.dot(p) - self.offset
    }

    pub fn project(&self, p: &Vector3<T>) -> Vector3<T> {
        p - self.normal * self.signed_distance(p)
    }

    /// Same plane with the normal flipped so that `normal . up >= 0`.
    pub fn oriented_up(self, up: &Vector3<T>) -> Self {
        if self.normal.dot(up) < T::ZERO {
            Self { normal: -self.normal, offset: -self.offset }
        } else {
            self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    pub iterations: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self { iterations: 200, seed: 0 }
    }
}

/// RANSAC plane fit. Returns the plane with the most inliers within
/// `dist_thresh` (first found wins ties), refined by a PCA fit over its
/// inliers when that does not lose inliers. Inliers are sorted ascending.
pub fn extract_plane<T: Real>(
    cloud: &PointCloud<T>,
    dist_thresh: T,
    params: &RansacParams,
) -> Result<(Plane<T>, Vec<usize>), CloudError<T>> {
    let pts = &cloud.points;
    if pts.len() < 3 {
        return Err(CloudError::InsufficientPoints { needed: 3, available: pts.len() });
    }
    if !has_non_collinear_triple(pts) {
        return Err(CloudError::DegenerateInput("no three non-collinear points"));
    }
    let inliers_of = |plane: &Plane<T>| -> Vec<usize> {
        (0..pts.len()).filter(|&i| plane.signed_distance(&pts[i]).abs() <= dist_thresh).collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(Plane<T>, usize)> = None;
    let n = pts.len();
    for _ in 0..params.iterations.max(1) {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let k = rng.random_range(0..n);
        if i == j || j == k || i == k {
            continue;
        }
        let Some(plane) = Plane::from_points(&pts[i], &pts[j], &pts[k]) else {
            continue;
        };
        let count = pts.iter().filter(|p| plane.signed_distance(p).abs() <= dist_thresh).count();
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((plane, count));
        }
    }
    let plane = match best {
        Some((p, _)) => p,
        // Every sample was degenerate; fall back to a deterministic triple.
        None => deterministic_plane(pts).ok_or(CloudError::DegenerateInput("no three non-collinear points"))?,
    };
    let inliers = inliers_of(&plane);
    if let Some(refined) = refit(pts, &inliers) {
        let refined_inliers = inliers_of(&refined);
        if refined_inliers.len() >= inliers.len() {
            return Ok((refined, refined_inliers));
        }
    }
    Ok((plane, inliers))
}

fn refit<T: Real>(pts: &[Vector3<T>], inliers: &[usize]) -> Option<Plane<T>> {
    if inliers.len() < 3 {
        return None;
    }
    let normal = pca_normal(inliers.iter().map(|&i| &pts[i]))?;
    let mean = inliers.iter().fold(Vector3::zeros(), |acc, &i| acc + pts[i]) / T::from_usize_lossy(inliers.len());
    Some(Plane::from_point_normal(&mean, &normal))
}

fn deterministic_plane<T: Real>(pts: &[Vector3<T>]) -> Option<Plane<T>> {
    let a = pts[0];
    let (bi, _) = pts
        .iter()
        .enumerate()
        .max_by(|x, y| (x.1 - a).norm_squared().total_cmp_finite(&(y.1 - a).norm_squared()))?;
    let b = pts[bi];
    let dir = (b - a).try_normalize(T::default_epsilon())?;
    let (ci, _) = pts.iter().enumerate().max_by(|x, y| {
        let dx = (x.1 - a) - dir * dir.dot(&(x.1 - a));
        let dy = (y.1 - a) - dir * dir.dot(&(y.1 - a));
        dx.norm_squared().total_cmp_finite(&dy.norm_squared())
    })?;
    Plane::from_points(&a, &b, &pts[ci])
}

fn has_non_collinear_triple<T: Real>(pts: &[Vector3<T>]) -> bool {
    deterministic_plane(pts).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_plane(n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .flat_map(|i| (0..n).map(move |j| Vector3::new(i as f64 * 0.01, j as f64 * 0.01, 0.0)))
            .collect()
    }

    #[test]
    fn pure_plane_all_inliers() {
        let cloud = PointCloud::new(grid_plane(30));
        let (plane, inliers) = extract_plane(&cloud, 0.005, &RansacParams::default()).unwrap();
        assert_eq!(inliers.len(), cloud.len());
        assert!(plane.normal.z.abs() > 0.999_999);
    }

    #[test]
    fn recovers_plane_among_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut pts = grid_plane(40);
        let truth = pts.len();
        for _ in 0..truth / 10 {
            pts.push(Vector3::new(rng.random_range(0.0..0.4), rng.random_range(0.0..0.4), rng.random_range(0.02..0.5)));
        }
        let cloud = PointCloud::new(pts);
        let (_, inliers) = extract_plane(&cloud, 0.005, &RansacParams { iterations: 200, seed: 7 }).unwrap();
        let recovered = inliers.iter().filter(|&&i| i < truth).count();
        assert!(recovered as f64 >= 0.99 * truth as f64);
        assert!(inliers.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn collinear_input_is_degenerate() {
        let pts = vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 1.0, 1.0), Vector3::new(2.0, 2.0, 2.0)];
        assert!(matches!(
            extract_plane(&PointCloud::new(pts), 0.005, &RansacParams::default()),
            Err(CloudError::DegenerateInput(_))
        ));
    }

    #[test]
    fn deterministic_for_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vector3<f64>> = (0..300).map(|_| Vector3::new(rng.random(), rng.random(), rng.random::<f64>() * 0.01)).collect();
        let cloud = PointCloud::new(pts);
        let a = extract_plane(&cloud, 0.003, &RansacParams { iterations: 50, seed: 11 }).unwrap();
        let b = extract_plane(&cloud, 0.003, &RansacParams { iterations: 50, seed: 11 }).unwrap();
        assert_eq!(a, b);
    }
}
