use wrapkit::evaluation::{wrap_quality_r, EvalParams, GOOD_R_THRESHOLD};
use wrapkit::geometry::{Face, Pose};
use wrapkit::recognition::predict_covered_cloud;
use wrapkit::synth::*;
use wrapkit::Vec3;

fn noiseless_box() -> SceneConfig {
    let mut c = SceneConfig::paper_box();
    c.noise = 0.0;
    c
}

#[test]
fn scenes_are_deterministic_per_seed() {
    let mut c = SceneConfig::paper_box();
    c.seed = 9;
    c.clutter = 3;
    let a = synth_scene(&c).unwrap();
    let b = synth_scene(&c).unwrap();
    assert_eq!(a, b);
    c.seed = 10;
    let d = synth_scene(&c).unwrap();
    assert_ne!(a.1, d.1);
}

#[test]
fn ground_truth_matches_config() {
    let (_, _, _, gt) = synth_scene(&SceneConfig::paper_box()).unwrap();
    assert_eq!(gt.target.size, Vec3::new(0.145, 0.215, 0.115));
    assert_eq!(gt.target.pose.position, Vec3::new(0.0, 0.0, 0.0575));
    assert_eq!((gt.wrapper.width, gt.wrapper.length), (0.175, 0.60));
    assert!(gt.covered.is_empty());

    let (_, _, _, gt) = synth_scene(&SceneConfig::paper_cylinder()).unwrap();
    assert!((gt.target.size - Vec3::new(0.18, 0.18, 0.20)).norm() < 1e-12);
}

#[test]
fn labels_partition_the_cloud_and_match_colors() {
    let mut c = SceneConfig::paper_box();
    c.clutter = 4;
    let (_, cloud, _, gt) = synth_scene(&c).unwrap();
    assert_eq!(gt.labels.len(), cloud.len());
    let colors = cloud.colors.as_ref().unwrap();
    for (label, color) in gt.labels.iter().zip(colors) {
        let expected = match label {
            Label::Target => Some(TARGET_COLOR),
            Label::Wrapper => Some(WRAPPER_COLOR),
            Label::Seal => Some(SEAL_COLOR),
            Label::Table => Some(TABLE_COLOR),
            Label::Clutter => None,
        };
        if let Some(e) = expected {
            assert_eq!(*color, e);
        }
    }
    for l in [Label::Target, Label::Wrapper, Label::Seal, Label::Table, Label::Clutter] {
        assert!(gt.labels.contains(&l), "{l:?} missing");
    }
}

#[test]
fn noiseless_points_lie_on_surfaces() {
    let (world, cloud, _, gt) = synth_scene(&noiseless_box()).unwrap();
    for (p, label) in cloud.points.iter().zip(&gt.labels) {
        match label {
            Label::Target => assert!(world.target.signed_distance(p).abs() < 1e-9),
            Label::Table => assert_eq!(p.z, 0.0),
            Label::Wrapper => assert!((p.z - SHEET_THICKNESS).abs() < 1e-12),
            Label::Seal | Label::Clutter => assert!((p.z - 0.0005).abs() < 1e-12),
        }
    }
}

#[test]
fn range_noise_has_half_normal_mean() {
    let sigma = 0.002;
    let mut c = SceneConfig::paper_box();
    c.noise = sigma;
    let (_, cloud, _, gt) = synth_scene(&c).unwrap();
    let d: Vec<f64> = cloud.points.iter().zip(&gt.labels).filter(|(_, l)| **l == Label::Table).map(|(p, _)| p.z.abs()).collect();
    assert!(d.len() >= 10_000);
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let expected = sigma * (2.0 / std::f64::consts::PI).sqrt();
    assert!((mean / expected - 1.0).abs() < 0.10, "mean {mean} expected {expected}");
}

fn max_offset(cloud: &wrapkit::cloud::PointCloud<f64>, world: &wrapkit::control::WorldState) -> f64 {
    cloud.points.iter().map(|p| world.target.signed_distance(p)).fold(f64::MIN, f64::max)
}

#[test]
fn flat_drape_hugs_the_box() {
    let c = noiseless_box();
    let w = initial_world(&c).unwrap();
    let faces = w.cover_plan().unwrap().faces();
    let cloud = drape_wrapper(&w, &faces, &BulgeSpec::default(), c.sampling(), 1).unwrap();
    assert!(cloud.len() > 1000);
    let m = max_offset(&cloud, &w);
    assert!(m <= SHEET_THICKNESS + FOLD_RADIUS + 1e-12, "max offset {m}");
    assert!(cloud.points.iter().all(|p| w.target.signed_distance(p) > -0.001));
}

#[test]
fn bulge_peaks_at_its_amplitude() {
    let c = noiseless_box();
    let w = initial_world(&c).unwrap();
    let faces = w.cover_plan().unwrap().faces();
    let bulge = BulgeSpec { amplitude: 0.020, fraction: 0.3 };
    let cloud = drape_wrapper(&w, &faces, &bulge, c.sampling(), 1).unwrap();
    let m = max_offset(&cloud, &w);
    assert!((0.019..=0.021).contains(&m), "max offset {m}");
}

#[test]
fn disconnected_cover_is_rejected() {
    let w = initial_world(&noiseless_box()).unwrap();
    let r = drape_wrapper(&w, &[Face::Abfe, Face::Cdhg], &BulgeSpec::default(), noiseless_box().sampling(), 1);
    assert!(matches!(r, Err(SynthError::InvalidCover(_))));
}

#[test]
fn flat_drape_evaluates_as_good_wrap() {
    let c = SceneConfig::paper_box();
    let w = initial_world(&c).unwrap();
    let (pre, _) = capture(&w, &c, 1).unwrap();
    let (post, _) = capture(&covered_world(&w, 0.0).unwrap(), &c, 2).unwrap();
    let a = predict_covered_cloud(&pre, &w.target, &w.wrapper.rest).unwrap();
    let b = predict_covered_cloud(&post, &w.target, &w.wrapper.rest).unwrap();
    let r = wrap_quality_r(&a, &b, &EvalParams::default()).unwrap().r;
    assert!(r < GOOD_R_THRESHOLD, "r = {r}");
}

#[test]
fn empty_world_renders_table_only() {
    let c = noiseless_box();
    let mut w = initial_world(&c).unwrap();
    let away = Vec3::new(5.0, 5.0, 0.0);
    w.target.pose.position += away;
    w.wrapper.cbbox.pose.position += away;
    w.wrapper.rest.pose.position += away;
    w.seal.pose = Pose::from_position(w.seal.pose.position + away);
    let img = render_views(&w, &c).unwrap();
    assert!(img.rgb.iter().all(|c| *c == TABLE_COLOR));
    assert!(img.lookup.iter().all(|p| p.is_some_and(|p| p.z == 0.0)));
}

#[test]
fn top_face_pixels_carry_box_color_and_height() {
    let c = noiseless_box();
    let (world, _, img, _) = synth_scene(&c).unwrap();
    let [x0, _, _, y1] = c.table_extent;
    let center = world.target.pose.position;
    let px = ((center.x - x0) / c.resolution) as usize;
    let py = ((y1 - center.y) / c.resolution) as usize;
    assert_eq!(img.color(px, py), TARGET_COLOR);
    let p = img.point(px, py).unwrap();
    assert!((p.z - 0.115).abs() < 1e-9);
    assert!((p.x - center.x).abs() <= c.resolution && (p.y - center.y).abs() <= c.resolution);
}

#[test]
fn wrapper_under_box_is_occluded() {
    let c = noiseless_box();
    let (_, _, img, _) = synth_scene(&c).unwrap();
    let visible = img.color_mask(WRAPPER_COLOR, 0).len() as f64;
    let area = 0.175 * 0.60 - 0.145 * 0.215;
    let expected = area / (c.resolution * c.resolution);
    assert!((visible / expected - 1.0).abs() < 0.01, "{visible} vs {expected}");
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = SceneConfig::paper_box();
    c.target.shape = wrapkit::control::TargetShape::Box { size: Vec3::new(-0.1, 0.2, 0.1) };
    assert!(matches!(c.validate(), Err(SynthError::InvalidConfig(_))));
    let mut c = SceneConfig::paper_box();
    c.wrapper.length = 0.2;
    assert!(matches!(c.validate(), Err(SynthError::InvalidConfig(_))));
    let mut c = SceneConfig::paper_box();
    c.bulge.fraction = 1.5;
    assert!(c.validate().is_err());
}

#[test]
fn config_round_trips_through_json() {
    let c = SceneConfig::paper_cylinder();
    let s = serde_json::to_string(&c).unwrap();
    let back: SceneConfig = serde_json::from_str(&s).unwrap();
    assert_eq!(c, back);
}
