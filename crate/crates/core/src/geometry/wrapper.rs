use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{check_positive, EdgeSegment, GeometryError, Pose, Rgb};
use crate::Real;

/// The wrapper sheet in its initial flat state: a zero-height rectangle.
///
/// The local x axis spans `width`, the local y axis spans `length`. Corners
/// follow the target's top-face pattern: `a = (+w/2, -l/2)`,
/// `b = (-w/2, -l/2)`, `c = (-w/2, +l/2)`, `d = (+w/2, +l/2)`, so with an
/// identity pose `W_ab` is the robot-right short edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct ColoredBBox<T: Real> {
    pub pose: Pose<T>,
    pub width: T,
    pub length: T,
    pub color: Rgb,
}

impl<T: Real> ColoredBBox<T> {
    pub fn new(pose: Pose<T>, width: T, length: T, color: Rgb) -> Result<Self, GeometryError> {
        check_positive(&[width, length])?;
        if !pose.is_finite() {
            return Err(GeometryError::NonFinitePose);
        }
        Ok(Self { pose, width, length, color })
    }

    fn local_corner(&self, label: char) -> Option<Vector3<T>> {
        let w = self.width * T::HALF;
        let l = self.length * T::HALF;
        let z = T::ZERO;
        Some(match label {
            'a' => Vector3::new(w, -l, z),
            'b' => Vector3::new(-w, -l, z),
            'c' => Vector3::new(-w, l, z),
            'd' => Vector3::new(w, l, z),
            _ => return None,
        })
    }

    /// Corners `a, b, c, d` in world coordinates.
    pub fn corners(&self) -> [Vector3<T>; 4] {
        ['a', 'b', 'c', 'd'].map(|c| self.pose.transform_point(&self.local_corner(c).unwrap()))
    }

    pub fn edge_by_label(&self, label: &str) -> Result<EdgeSegment<T>, GeometryError> {
        let chars: Vec<char> = label.trim().to_ascii_lowercase().chars().collect();
        let ok = matches!(
            chars.as_slice(),
            ['a', 'b'] | ['b', 'c'] | ['c', 'd'] | ['d', 'a'] | ['b', 'a'] | ['c', 'b'] | ['d', 'c'] | ['a', 'd']
        );
        if !ok {
            return Err(GeometryError::InvalidLabel(label.to_string()));
        }
        let p = self.pose.transform_point(&self.local_corner(chars[0]).unwrap());
        let q = self.pose.transform_point(&self.local_corner(chars[1]).unwrap());
        Ok(EdgeSegment { endpoints: [p, q], labels: [chars[0], chars[1]] })
    }

    /// World direction of the long (length) axis.
    pub fn long_axis(&self) -> Vector3<T> {
        self.pose.transform_vector(&Vector3::y())
    }

    /// Whether the orthogonal projection of `p` onto the sheet plane lies inside the rectangle.
    pub fn footprint_contains(&self, p: &Vector3<T>) -> bool {
        let l = self.pose.inverse_transform_point(p);
        l.x.abs() <= self.width * T::HALF && l.y.abs() <= self.length * T::HALF
    }
}

/// The seal summarized by its color and the mean of its observed points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct SealCmp<T: Real> {
    pub color: Rgb,
    pub mean_point: Vector3<T>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_labels_follow_length_axis() {
        let w = ColoredBBox::new(Pose::<f64>::identity(), 0.175, 0.6, Rgb::new(200, 30, 30)).unwrap();
        let ab = w.edge_by_label("ab").unwrap();
        assert!((ab.midpoint() - Vector3::new(0.0, -0.3, 0.0)).norm() < 1e-15);
        assert!((ab.length() - 0.175).abs() < 1e-15);
        assert!(w.edge_by_label("ac").is_err());
        assert!(ColoredBBox::new(Pose::<f64>::identity(), 0.0, 0.6, Rgb::default()).is_err());
    }
}
