use nalgebra::{Isometry3, UnitQuaternion};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wrapkit::cloud::{estimate_normals, NormalParams, Orientation, PointCloud};
use wrapkit::geometry::{Face, Rgb};
use wrapkit::recognition::*;
use wrapkit::synth::{covered_world, initial_world, render_views, synth_scene, SceneConfig};
use wrapkit::Vec3;

const RED: Rgb = Rgb::new(200, 40, 40);
const GRAY: Rgb = Rgb::new(120, 120, 120);
const PX: f64 = 0.001;

fn table_plane() -> wrapkit::cloud::Plane<f64> {
    wrapkit::cloud::Plane::from_point_normal(&Vec3::zeros(), &Vec3::z())
}

/// Flat image whose pixel `(u, v)` sees the table point `(u, v) * PX`.
fn flat_image(width: usize, height: usize, paint: impl Fn(usize, usize) -> Rgb) -> SceneImage<f64> {
    let mut rgb = Vec::with_capacity(width * height);
    let mut lookup = Vec::with_capacity(width * height);
    for v in 0..height {
        for u in 0..width {
            rgb.push(paint(u, v));
            lookup.push(Some(Vec3::new(u as f64 * PX, v as f64 * PX, 0.0)));
        }
    }
    SceneImage::new(width, height, rgb, lookup).unwrap()
}

/// The four sides of the pixel rectangle `[u0, u1] x [v0, v1]` (inclusive).
fn rect_sides(u0: usize, u1: usize, v0: usize, v1: usize) -> Vec<EdgeDescriptor<f64>> {
    let p = |u: usize, v: usize| Vec3::new(u as f64 * PX, v as f64 * PX, 0.0);
    [(p(u0, v0), p(u1, v0)), (p(u1, v0), p(u1, v1)), (p(u1, v1), p(u0, v1)), (p(u0, v1), p(u0, v0))]
        .iter()
        .map(|(a, b)| EdgeDescriptor::from_endpoints(a, b).unwrap())
        .collect()
}

fn found(side: &EdgeDescriptor<f64>, edges: &[EdgeDescriptor<f64>]) -> bool {
    edges.iter().any(|e| {
        (e.center - side.center).norm() < 0.005 && e.direction.dot(&side.direction).abs() > 2f64.to_radians().cos()
    })
}

fn arb_descriptor() -> impl Strategy<Value = EdgeDescriptor<f64>> {
    (prop::array::uniform3(-1.0f64..1.0), prop::array::uniform3(-1.0f64..1.0), 0.01f64..1.0).prop_filter_map(
        "direction",
        |(c, d, l)| {
            let d = Vec3::from(d).try_normalize(1e-3)?;
            Some(EdgeDescriptor { center: Vec3::from(c), length: l, direction: d })
        },
    )
}

fn arb_weights() -> impl Strategy<Value = SimilarityWeights<f64>> {
    (0.0f64..5.0, 0.0f64..5.0, 0.0f64..5.0)
        .prop_filter("not all zero", |(a, b, c)| a + b + c > 1e-3)
        .prop_map(|(w_p, w_l, w_v)| SimilarityWeights { w_p, w_l, w_v })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn match_edge_argmin_is_scale_consistent(
        cands in prop::collection::vec(arb_descriptor(), 1..20),
        model in arb_descriptor(),
        w in arb_weights(),
        c in 0.01f64..100.0,
    ) {
        let (best, scores) = match_edge(&cands, &model, &w).unwrap();
        let scaled = SimilarityWeights { w_p: w.w_p * c, w_l: w.w_l * c, w_v: w.w_v * c };
        let (best_scaled, scaled_scores) = match_edge(&cands, &model, &scaled).unwrap();
        let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(scores[best], min);
        prop_assert!(scores.iter().take(best).all(|s| *s > min));
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-12);
        prop_assert!(best_scaled == best || rel(scaled_scores[best_scaled], scaled_scores[best]));
    }

    #[test]
    fn direction_term_is_bounded(a in arb_descriptor(), b in arb_descriptor(), s in -5.0f64..5.0) {
        let (dp, dl, dv) = a.differences(&b);
        prop_assert!((0.0..=1.0).contains(&dv));
        prop_assert!(dp >= 0.0 && dl >= 0.0);
        prop_assume!(s.abs() > 1e-3);
        let parallel = EdgeDescriptor { direction: a.direction * s, ..b };
        prop_assert!(a.differences(&parallel).2.abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn target_bbox_is_rotation_equivariant(theta in -3.1f64..3.1, seed in 0u64..4) {
        let mut cfg = SceneConfig::paper_box();
        cfg.seed = seed;
        cfg.noise = 0.0;
        let (_, cloud, _, _) = synth_scene(&cfg).unwrap();
        let base = recog_target_bbox(&cloud, &table_plane(), TargetAnnotations::default()).unwrap().bbox;
        let rot = Isometry3::from_parts(Default::default(), UnitQuaternion::from_axis_angle(&Vec3::z_axis(), theta));
        let turned = recog_target_bbox(&cloud.transformed(&rot), &table_plane(), TargetAnnotations::default()).unwrap().bbox;
        let moved = rot.transform_point(&base.center().into()).coords;
        prop_assert!((turned.center() - moved).norm() < 0.003, "center {:?} vs {:?}", turned.center(), moved);
        let sorted = |s: Vec3| { let mut v = [s.x, s.y]; v.sort_by(f64::total_cmp); (v, s.z) };
        let (a, az) = sorted(base.size);
        let (b, bz) = sorted(turned.size);
        prop_assert!((a[0] - b[0]).abs() < 0.003 && (a[1] - b[1]).abs() < 0.003 && (az - bz).abs() < 0.003);
        let quarter = std::f64::consts::FRAC_PI_2;
        let dyaw = (turned.pose.yaw() - base.pose.yaw() - theta).rem_euclid(quarter);
        prop_assert!(dyaw.min(quarter - dyaw) < 1f64.to_radians(), "yaw residual {dyaw}");
        prop_assert!(turned.face(Face::Efgh).signed_distance(&Vec3::zeros()).abs() < 1e-9);
    }
}

#[test]
fn rectangle_sheet_gives_its_four_sides() {
    let img = flat_image(200, 150, |u, v| if (30..=169).contains(&u) && (40..=109).contains(&v) { RED } else { GRAY });
    let edges = detect_edges(&img);
    let sides = rect_sides(30, 169, 40, 109);
    assert!(sides.iter().all(|s| found(s, &edges)), "{edges:#?}");
    for e in &edges {
        assert!(e.length >= 0.02);
        assert!((e.direction.norm() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn occluded_side_leaves_the_other_three() {
    let img = flat_image(200, 150, |u, v| {
        let sheet = (30..=169).contains(&u) && (40..=109).contains(&v);
        let cover = Rgb::new(60, 170, 60);
        if (150..=185).contains(&u) && (20..=130).contains(&v) {
            cover
        } else if sheet {
            RED
        } else {
            GRAY
        }
    });
    let edges = detect_edges(&img);
    let sides = rect_sides(30, 169, 40, 109);
    assert!(found(&sides[3], &edges));
    let correct = edges
        .iter()
        .filter(|e| sides.iter().any(|s| (e.center - s.center).norm() < 0.02 && e.direction.dot(&s.direction).abs() > 0.999))
        .count();
    assert!(correct >= 3, "{edges:#?}");
}

#[test]
fn blank_image_has_no_edges() {
    assert!(detect_edges(&flat_image(50, 40, |_, _| GRAY)).is_empty());
}

#[test]
fn wrapper_cbbox_matches_ground_truth_straight_and_rotated() {
    for yaw_deg in [0.0f64, 15.0] {
        let mut cfg = SceneConfig::paper_box();
        cfg.wrapper.yaw = yaw_deg.to_radians();
        let world = initial_world(&cfg).unwrap();
        let img = render_views(&world, &cfg).unwrap();
        let got = recog_wrapper_cbbox(&img, cfg.wrapper.color, 30).unwrap();
        let truth = world.wrapper.rest;
        assert!((got.width - truth.width).abs() < 0.005, "{yaw_deg}: width {}", got.width);
        assert!((got.length - truth.length).abs() < 0.005, "{yaw_deg}: length {}", got.length);
        let dyaw = (got.long_axis().dot(&truth.long_axis())).abs().min(1.0).acos();
        assert!(dyaw < 1f64.to_radians(), "{yaw_deg}: yaw off by {dyaw}");
        assert!((got.pose.position.xy() - truth.pose.position.xy()).norm() < 0.005);
    }
}

#[test]
fn missing_wrapper_is_not_found() {
    let img = flat_image(60, 60, |_, _| GRAY);
    assert!(recog_wrapper_cbbox(&img, RED, 30).is_err());
}

#[test]
fn seal_mean_ignores_surrounding_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let seal = Rgb::new(40, 80, 200);
    let mut points = Vec::new();
    let mut colors = Vec::new();
    let mut seal_points = Vec::new();
    for i in 0..10_000 {
        let p = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..0.3));
        points.push(p);
        if i % 97 == 0 {
            colors.push(seal);
            seal_points.push(p);
        } else {
            colors.push(Rgb::new(rng.random_range(100..=255), rng.random(), rng.random()));
        }
    }
    let cloud = PointCloud::with_colors(points, colors).unwrap();
    let cmp = recog_seal_cmp(&cloud, seal, 30).unwrap();
    let mean = seal_points.iter().sum::<Vec3>() / seal_points.len() as f64;
    assert!((cmp.mean_point - mean).norm() < 1e-12);
    assert!(recog_seal_cmp(&cloud, Rgb::new(0, 0, 0), 10).is_err());
}

fn local_normals(cloud: &PointCloud<f64>, pos: &Vec3, radius: f64) -> PointCloud<f64> {
    let near = PointCloud::new(cloud.points.iter().copied().filter(|p| (p - pos).norm() <= radius).collect());
    let params = NormalParams { k: 10, orientation: Orientation::TowardViewpoint(pos + Vec3::z()) };
    estimate_normals(&near, &params).unwrap()
}

#[test]
fn seal_normal_on_flat_top_and_cylinder_shoulder() {
    let (_, cloud, _, gt) = synth_scene(&SceneConfig::paper_box()).unwrap();
    let top = gt.target.face(Face::Abcd).center();
    let n = seal_normal(&local_normals(&cloud, &top, 0.1), &top, 0.05).unwrap();
    assert!(n.z.acos().to_degrees() < 1.0, "{n:?}");

    let (_, cloud, _, gt) = synth_scene(&SceneConfig::paper_cylinder()).unwrap();
    let rim = gt.target.pose.position + Vec3::new(0.0, 0.09, 0.08);
    let n = seal_normal(&local_normals(&cloud, &rim, 0.1), &rim, 0.05).unwrap();
    let tilt = n.z.acos().to_degrees();
    assert!((5.0..80.0).contains(&tilt) && n.y > 0.0, "{n:?}");
    assert!((n.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn seal_normal_errors() {
    let mut cloud = PointCloud::new(vec![Vec3::zeros(), Vec3::new(0.01, 0.0, 0.0)]);
    assert!(seal_normal(&cloud, &Vec3::zeros(), 0.05).is_err());
    cloud.set_normals(vec![Vec3::z(), -Vec3::z()]).unwrap();
    assert!(matches!(seal_normal(&cloud, &Vec3::zeros(), 0.05), Err(RecogError::DegenerateNormal)));
    assert!(seal_normal(&cloud, &Vec3::new(1.0, 0.0, 0.0), 0.05).is_err());
    assert!(seal_normal(&cloud, &Vec3::zeros(), 0.0).is_err());
}

#[test]
fn seal_target_tracks_a_shifted_scene() {
    let cfg = SceneConfig::paper_box();
    let model_world = initial_world(&cfg).unwrap();
    let mut shifted = cfg.clone();
    shifted.target.position[1] += 0.02;
    let post = covered_world(&initial_world(&shifted).unwrap(), 0.0).unwrap();
    let img = render_views(&post, &shifted).unwrap();
    let (pos, _) =
        recog_seal_target(&img, &model_world.target, &model_world.wrapper.rest, &SimilarityWeights::default()).unwrap();
    let actual = post.actual_cover().unwrap().free_edge().midpoint();
    let predicted = model_world.cover_plan().unwrap().free_edge().midpoint();
    assert!((pos - actual).norm() < 0.01, "{pos:?} vs {actual:?}");
    assert!((pos - predicted).norm() > 0.01);
}

#[test]
fn update_poses_follows_a_one_centimeter_shift() {
    let cfg = SceneConfig::paper_box();
    let models = initial_world(&cfg).unwrap();
    let w = SimilarityWeights::default();

    let still = update_poses(&render_views(&models, &cfg).unwrap(), &models.target, &models.wrapper.rest, &w, UpdateEdge::WrapperCd);
    assert!(!still.stale);
    assert!(still.offset.norm() < 0.002, "{:?}", still.offset);

    let mut moved = cfg.clone();
    moved.target.position[1] += 0.01;
    let img = render_views(&initial_world(&moved).unwrap(), &moved).unwrap();
    let up = update_poses(&img, &models.target, &models.wrapper.rest, &w, UpdateEdge::WrapperCd);
    assert!(!up.stale);
    let shift = up.target.position - models.target.pose.position;
    assert!((shift - Vec3::new(0.0, 0.01, 0.0)).norm() < 0.002, "{shift:?}");
    let shift = up.wrapper.position - models.wrapper.rest.pose.position;
    assert!((shift - Vec3::new(0.0, 0.01, 0.0)).norm() < 0.002, "{shift:?}");

    let blank = flat_image(40, 40, |_, _| GRAY);
    let stale = update_poses(&blank, &models.target, &models.wrapper.rest, &w, UpdateEdge::WrapperCd);
    assert!(stale.stale);
    assert_eq!(stale.target, models.target.pose);
    assert_eq!(stale.wrapper, models.wrapper.rest.pose);
}

#[test]
fn target_bbox_needs_points_above_the_table() {
    let flat = PointCloud::new((0..500).map(|i| Vec3::new((i % 25) as f64 * 0.01, (i / 25) as f64 * 0.01, 0.0)).collect());
    assert!(recog_target_bbox(&flat, &table_plane(), TargetAnnotations::default()).is_err());
}
