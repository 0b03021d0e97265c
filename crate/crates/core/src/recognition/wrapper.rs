use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3};

use super::image::{convex_hull, visvalingam, SceneImage};
use super::RecogError;
use crate::geometry::{ColoredBBox, Pose, Rgb};
use crate::Real;

const MIN_PIXELS: usize = 100;

/// Four corner pixels of the wrapper-colored region: the convex hull of the
/// color mask reduced to a quadrilateral, in hull order.
pub fn wrapper_corners_px<T: Real>(scene: &SceneImage<T>, color: Rgb, tol: u8) -> Result<[Vector2<f64>; 4], RecogError> {
    let mask = scene.color_mask(color, tol);
    if mask.len() < MIN_PIXELS {
        return Err(RecogError::NotFound("wrapper region"));
    }
    let hull = convex_hull(&mask);
    if hull.len() < 4 {
        return Err(RecogError::NotFound("wrapper quadrilateral"));
    }
    let quad = visvalingam(&hull, 4);
    Ok([quad[0], quad[1], quad[2], quad[3]])
}

/// Wrapper rectangle from the scene image.
///
/// Corners are lifted through the pixel lookup. The long axis becomes the
/// local y axis, oriented toward the robot's left, so `W_ab` is the
/// robot-right short edge.
pub fn recog_wrapper_cbbox<T: Real>(scene: &SceneImage<T>, color: Rgb, tol: u8) -> Result<ColoredBBox<T>, RecogError> {
    let px = wrapper_corners_px(scene, color, tol)?;
    let mut corners = Vec::with_capacity(4);
    let mut bad = Vec::new();
    for c in &px {
        let (x, y) = (c.x as usize, c.y as usize);
        match scene.point(x, y) {
            Some(p) => corners.push(p),
            None => bad.push((x, y)),
        }
    }
    if !bad.is_empty() {
        return Err(RecogError::LiftFailure(bad));
    }
    let side = |i: usize| corners[(i + 1) % 4] - corners[i];
    let len = |i: usize| side(i).xy().norm();
    let (long0, short0) = if len(0) + len(2) >= len(1) + len(3) { (0, 1) } else { (1, 0) };
    let length = (len(long0) + len(long0 + 2)) * T::HALF;
    let width = (len(short0) + len(short0 + 2)) * T::HALF;
    // Opposite sides run in opposite directions around the polygon.
    let dir = (side(long0) - side(long0 + 2)).xy();
    let mut y = dir.try_normalize(T::default_epsilon()).ok_or(RecogError::NotFound("wrapper direction"))?;
    if y.y < T::ZERO || (y.y == T::ZERO && y.x < T::ZERO) {
        y = -y;
    }
    let y_axis = Vector3::new(y.x, y.y, T::ZERO);
    let z_axis = Vector3::z();
    let x_axis = y_axis.cross(&z_axis);
    let center = corners.iter().fold(Vector3::zeros(), |a, p| a + p) / T::lit(4.0);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x_axis, y_axis, z_axis]));
    let pose = Pose::new(center, UnitQuaternion::from_rotation_matrix(&rot));
    ColoredBBox::new(pose, width, length, color).map_err(|_| RecogError::NotFound("wrapper with positive size"))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Orthographic 1 mm/px render of a rectangle on a blank table.
    fn render(w: f64, l: f64, yaw: f64, color: Rgb) -> SceneImage<f64> {
        let (nx, ny) = (800usize, 800usize);
        let res = 0.001;
        let mut img = SceneImage::blank(nx, ny, Rgb::new(90, 90, 90));
        let (c, s) = (yaw.cos(), yaw.sin());
        for py in 0..ny {
            for px in 0..nx {
                let x = (px as f64 - 400.0) * res;
                let y = (400.0 - py as f64) * res;
                let lx = c * x + s * y;
                let ly = -s * x + c * y;
                let i = img.index(px, py);
                img.lookup[i] = Some(Vector3::new(x, y, 0.0));
                if lx.abs() <= w / 2.0 && ly.abs() <= l / 2.0 {
                    img.rgb[i] = color;
                }
            }
        }
        img
    }

    #[test]
    fn axis_aligned_sheet() {
        let red = Rgb::new(200, 30, 30);
        let cb = recog_wrapper_cbbox(&render(0.175, 0.6, 0.0, red), red, 30).unwrap();
        assert!((cb.width - 0.175).abs() < 0.005 && (cb.length - 0.6).abs() < 0.005);
        assert!(cb.pose.yaw().abs() < 1f64.to_radians());
        assert!(cb.edge_by_label("ab").unwrap().midpoint().y < -0.29);
    }

    #[test]
    fn rotated_sheet_corners_within_two_pixels() {
        let red = Rgb::new(200, 30, 30);
        let yaw = 15f64.to_radians();
        let img = render(0.175, 0.6, yaw, red);
        let px = wrapper_corners_px(&img, red, 30).unwrap();
        let (c, s) = (yaw.cos(), yaw.sin());
        for (sx, sy) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let (lx, ly) = (sx * 0.0875, sy * 0.3);
            let (x, y) = (c * lx - s * ly, s * lx + c * ly);
            let truth = Vector2::new(x / 0.001 + 400.0, 400.0 - y / 0.001);
            let d = px.iter().map(|p| (p - truth).norm()).fold(f64::MAX, f64::min);
            assert!(d <= 2.0, "corner {truth:?} off by {d}");
        }
        let cb = recog_wrapper_cbbox(&img, red, 30).unwrap();
        assert!((cb.pose.yaw() - yaw).abs() < 1f64.to_radians());
    }

    #[test]
    fn missing_region_and_lift_failure() {
        let red = Rgb::new(200, 30, 30);
        let img = SceneImage::<f64>::blank(50, 50, Rgb::new(0, 0, 0));
        assert_eq!(recog_wrapper_cbbox(&img, red, 30), Err(RecogError::NotFound("wrapper region")));
        let mut img = render(0.175, 0.6, 0.0, red);
        for v in img.lookup.iter_mut() {
            *v = None;
        }
        assert!(matches!(recog_wrapper_cbbox(&img, red, 30), Err(RecogError::LiftFailure(v)) if v.len() == 4));
    }
}
