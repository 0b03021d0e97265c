use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::RecogError;
use crate::geometry::Rgb;
use crate::Real;

/// RGB raster registered with an organized cloud: every pixel may carry the
/// 3D point it images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct SceneImage<T: Real> {
    pub width: usize,
    pub height: usize,
    /// Row-major, `y * width + x`.
    pub rgb: Vec<Rgb>,
    pub lookup: Vec<Option<Vector3<T>>>,
}

impl<T: Real> SceneImage<T> {
    pub fn new(
        width: usize,
        height: usize,
        rgb: Vec<Rgb>,
        lookup: Vec<Option<Vector3<T>>>,
    ) -> Result<Self, RecogError> {
        let n = width * height;
        if rgb.len() != n || lookup.len() != n {
            return Err(RecogError::ImageSize { expected: n, rgb: rgb.len(), lookup: lookup.len() });
        }
        Ok(Self { width, height, rgb, lookup })
    }

    /// Uniform image with no 3D lookup.
    pub fn blank(width: usize, height: usize, color: Rgb) -> Self {
        Self { width, height, rgb: vec![color; width * height], lookup: vec![None; width * height] }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn color(&self, x: usize, y: usize) -> Rgb {
        self.rgb[self.index(x, y)]
    }

    pub fn point(&self, x: usize, y: usize) -> Option<Vector3<T>> {
        self.lookup[self.index(x, y)]
    }

    /// Pixels within `tol` of `color`, as `(x, y)`.
    pub fn color_mask(&self, color: Rgb, tol: u8) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.color(x, y).max_channel_diff(&color) <= tol {
                    out.push((x, y));
                }
            }
        }
        out
    }
}

/// A 4-connected region of equal color and continuous depth.
#[derive(Clone, Debug)]
pub(crate) struct Component {
    pub pixels: Vec<(usize, usize)>,
    pub touches_border: bool,
}

/// Splits the pixels that have a 3D lookup into regions of identical color
/// whose neighboring depths differ by at most `depth_tol`.
pub(crate) fn components<T: Real>(img: &SceneImage<T>, depth_tol: T) -> (Vec<Component>, Vec<u32>) {
    const NONE: u32 = u32::MAX;
    let (w, h) = (img.width, img.height);
    let mut label = vec![NONE; w * h];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if label[start] != NONE || img.lookup[start].is_none() {
            continue;
        }
        let id = comps.len() as u32;
        let color = img.rgb[start];
        let mut comp = Component { pixels: Vec::new(), touches_border: false };
        label[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            comp.pixels.push((x, y));
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                comp.touches_border = true;
            }
            let z = img.lookup[i].expect("labeled pixels have lookup").z;
            let mut visit = |j: usize| {
                if label[j] != NONE || img.rgb[j] != color {
                    return;
                }
                if let Some(q) = img.lookup[j] {
                    if (q.z - z).abs() <= depth_tol {
                        label[j] = id;
                        stack.push(j);
                    }
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        comps.push(comp);
    }
    (comps, label)
}

/// Outer boundary of the region labeled `id`, traced with Moore-neighbor
/// tracing (clockwise in image coordinates) from `start`, which must be the
/// region's first pixel in raster order.
pub(crate) fn trace_boundary(label: &[u32], w: usize, h: usize, id: u32, start: (usize, usize)) -> Vec<(usize, usize)> {
    // Clockwise with y pointing down: W, NW, N, NE, E, SE, S, SW.
    const DIRS: [(i64, i64); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];
    let inside = |p: (i64, i64)| {
        p.0 >= 0 && p.1 >= 0 && (p.0 as usize) < w && (p.1 as usize) < h && label[p.1 as usize * w + p.0 as usize] == id
    };
    let dir_of = |from: (i64, i64), to: (i64, i64)| {
        DIRS.iter().position(|&(dx, dy)| (from.0 + dx, from.1 + dy) == to).expect("adjacent pixels")
    };
    let s = (start.0 as i64, start.1 as i64);
    let mut out = vec![start];
    let mut cur = s;
    let mut back = (s.0 - 1, s.1);
    let mut first_step: Option<(i64, i64)> = None;
    for _ in 0..(4 * w * h + 8) {
        let bd = dir_of(cur, back);
        let Some(d) = (1..=8).map(|k| (bd + k) % 8).find(|&d| inside((cur.0 + DIRS[d].0, cur.1 + DIRS[d].1)))
        else {
            return out;
        };
        let next = (cur.0 + DIRS[d].0, cur.1 + DIRS[d].1);
        if cur == s {
            match first_step {
                None => first_step = Some(next),
                // Jacob's criterion: leaving the start the same way again closes the loop.
                Some(f) if f == next => {
                    out.pop();
                    return out;
                }
                _ => {}
            }
        }
        back = (cur.0 + DIRS[(d + 7) % 8].0, cur.1 + DIRS[(d + 7) % 8].1);
        cur = next;
        out.push((cur.0 as usize, cur.1 as usize));
    }
    out
}

/// Polygon approximation of a closed contour by recursive splitting at the
/// farthest point followed by merging of collinear neighbors; no contour
/// point deviates more than `tol` from its segment.
pub(crate) fn split_and_merge(contour: &[(usize, usize)], tol: f64) -> Vec<usize> {
    let n = contour.len();
    if n < 3 {
        return (0..n).collect();
    }
    let pts: Vec<Vector2<f64>> = contour.iter().map(|&(x, y)| Vector2::new(x as f64, y as f64)).collect();
    let far = (1..n)
        .max_by(|&a, &b| (pts[a] - pts[0]).norm_squared().total_cmp(&(pts[b] - pts[0]).norm_squared()))
        .unwrap_or(0);
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[far] = true;
    split(&pts, 0, far, tol, &mut keep);
    split_wrap(&pts, far, n, tol, &mut keep);
    let mut verts: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();

    // Merge: drop a vertex when the span between its neighbors stays within tol.
    loop {
        let m = verts.len();
        if m <= 3 {
            break;
        }
        let mut removed = false;
        for j in 0..m {
            let a = verts[(j + m - 1) % m];
            let c = verts[(j + 1) % m];
            if max_dev(&pts, a, c) <= tol {
                verts.remove(j);
                removed = true;
                break;
            }
        }
        if !removed {
            break;
        }
    }
    verts
}

/// Splits the index range `(a, b)` with `a < b`.
fn split(pts: &[Vector2<f64>], a: usize, b: usize, tol: f64, keep: &mut [bool]) {
    if b <= a + 1 {
        return;
    }
    let (idx, dev) = farthest(pts, a, b);
    if dev > tol {
        keep[idx] = true;
        split(pts, a, idx, tol, keep);
        split(pts, idx, b, tol, keep);
    }
}

/// Splits the wrapping range from `a` to the end and back to index 0.
fn split_wrap(pts: &[Vector2<f64>], a: usize, n: usize, tol: f64, keep: &mut [bool]) {
    // Unroll: indices a..n then 0 as n.
    let ext: Vec<Vector2<f64>> = pts[a..].iter().copied().chain(std::iter::once(pts[0])).collect();
    let mut k = vec![false; ext.len()];
    split(&ext, 0, ext.len() - 1, tol, &mut k);
    for (i, flag) in k.iter().enumerate().take(ext.len() - 1) {
        if *flag {
            keep[(a + i) % n] = true;
        }
    }
}

/// Farthest point from chord `a..b` (exclusive) and its distance.
fn farthest(pts: &[Vector2<f64>], a: usize, b: usize) -> (usize, f64) {
    let mut best = (a, -1.0);
    for i in a + 1..b {
        let d = seg_dist(&pts[i], &pts[a], &pts[b]);
        if d > best.1 {
            best = (i, d);
        }
    }
    best
}

/// Maximum deviation of the contour points strictly between `a` and `c`
/// (cyclically) from segment `a-c`.
fn max_dev(pts: &[Vector2<f64>], a: usize, c: usize) -> f64 {
    let n = pts.len();
    let mut i = (a + 1) % n;
    let mut worst: f64 = 0.0;
    while i != c {
        worst = worst.max(seg_dist(&pts[i], &pts[a], &pts[c]));
        i = (i + 1) % n;
    }
    worst
}

fn seg_dist(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Convex hull (counter-clockwise in x-right/y-up sense) of integer points;
/// collinear points dropped.
pub(crate) fn convex_hull(points: &[(usize, usize)]) -> Vec<Vector2<f64>> {
    let mut pts: Vec<(i64, i64)> = points.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts.iter().map(|&(x, y)| Vector2::new(x as f64, y as f64)).collect();
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(i64, i64)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull.iter().map(|&(x, y)| Vector2::new(x as f64, y as f64)).collect()
}

/// Reduces a closed polygon to `target` vertices by repeatedly removing the
/// vertex spanning the smallest triangle with its neighbors.
pub(crate) fn visvalingam(poly: &[Vector2<f64>], target: usize) -> Vec<Vector2<f64>> {
    let mut v: Vec<Vector2<f64>> = poly.to_vec();
    while v.len() > target {
        let m = v.len();
        let area = |j: usize| {
            let a = v[(j + m - 1) % m];
            let b = v[j];
            let c = v[(j + 1) % m];
            ((b - a).perp(&(c - a))).abs() * 0.5
        };
        let j = (0..m).min_by(|&a, &b| area(a).total_cmp(&area(b))).expect("nonempty");
        v.remove(j);
    }
    v
}

/// Minimum-area enclosing rectangle of a convex polygon by rotating
/// calipers: returns (unit axis u, extents along u, extents along perp(u)).
pub(crate) fn min_area_rect<T: Real>(hull: &[Vector2<T>]) -> Option<(Vector2<T>, (T, T), (T, T))> {
    if hull.len() < 3 {
        return None;
    }
    let mut best: Option<(T, Vector2<T>, (T, T), (T, T))> = None;
    for i in 0..hull.len() {
        let e = hull[(i + 1) % hull.len()] - hull[i];
        let Some(u) = e.try_normalize(T::default_epsilon()) else { continue };
        let v = Vector2::new(-u.y, u.x);
        let (mut u0, mut u1, mut v0, mut v1) = (T::max_value()?, T::min_value()?, T::max_value()?, T::min_value()?);
        for p in hull {
            let a = p.dot(&u);
            let b = p.dot(&v);
            u0 = u0.min(a);
            u1 = u1.max(a);
            v0 = v0.min(b);
            v1 = v1.max(b);
        }
        let area = (u1 - u0) * (v1 - v0);
        if best.as_ref().is_none_or(|(a, ..)| area < *a) {
            best = Some((area, u, (u0, u1), (v0, v1)));
        }
    }
    best.map(|(_, u, a, b)| (u, a, b))
}

/// Convex hull of real-valued 2D points (Andrew's monotone chain).
pub(crate) fn convex_hull_real<T: Real>(points: &[Vector2<T>]) -> Vec<Vector2<T>> {
    let mut pts: Vec<Vector2<T>> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp_finite(&b.x).then(a.y.total_cmp_finite(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Vector2<T>, a: &Vector2<T>, b: &Vector2<T>| (a - o).perp(&(b - o));
    let mut hull: Vec<Vector2<T>> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let seq: Vec<Vector2<T>> = if pass == 0 { pts.clone() } else { pts.iter().rev().copied().collect() };
        for p in seq {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], &p) <= T::ZERO {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}
