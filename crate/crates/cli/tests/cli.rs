mod common;

use std::process::Command;

use common::*;
use proptest::prelude::*;
use serde_json::Value;
use wrapkit::cloud::PointCloud;
use wrapkit::evaluation::{wrap_quality_r, EvalParams};
use wrapkit::geometry::Rgb;
use wrapkit::synth::{synth_scene, wrap_pair, SceneConfig};
use wrapkit::Vec3;
use wrapkit_cli::image_io::read_lookup;
use wrapkit_cli::ply::{parse_ply, parse_ply_str, write_ply_string, PlyError};

const GOLDEN_PRE: &str = "bulged_seed11_pre.ply";
const GOLDEN_POST: &str = "bulged_seed11_post.ply";
const GOLDEN_EVAL: &str = "bulged_seed11_eval.json";
const BLESS_ENV: &str = "WRAPKIT_BLESS";

fn read_json(path: &std::path::Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn shell_harness_exit_codes() {
    let script = repo_root().join("crates/cli/tests/exit_codes.sh");
    let out = Command::new("bash")
        .arg(&script)
        .arg(env!("CARGO_BIN_EXE_wrapkit"))
        .arg(repo_root())
        .output()
        .expect("run bash");
    let stdout = String::from_utf8_lossy(&out.stdout);
    println!("{stdout}");
    assert!(out.status.success(), "exit-code harness failed:\n{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn golden_fixture_regenerates_from_config() {
    let text = std::fs::read_to_string(fixture("bulged_config.json")).unwrap();
    let mut config: SceneConfig = serde_json::from_str(&text).unwrap();
    config.seed = 11;
    let (pre, post) = wrap_pair(&config).unwrap();
    let (pre, post) = (write_ply_string(&pre), write_ply_string(&post));
    if std::env::var_os(BLESS_ENV).is_some() {
        std::fs::write(fixture(GOLDEN_PRE), &pre).unwrap();
        std::fs::write(fixture(GOLDEN_POST), &post).unwrap();
        let out = wrapkit(&[
            "eval",
            "--pre",
            fixture(GOLDEN_PRE).to_str().unwrap(),
            "--post",
            fixture(GOLDEN_POST).to_str().unwrap(),
            "--out",
            fixture(GOLDEN_EVAL).to_str().unwrap(),
        ]);
        assert!(out.status.code().is_some());
        let mut report = read_json(&fixture(GOLDEN_EVAL));
        report["pre"] = GOLDEN_PRE.into();
        report["post"] = GOLDEN_POST.into();
        std::fs::write(fixture(GOLDEN_EVAL), wrapkit_cli::report::to_json(&report)).unwrap();
    }
    assert!(std::fs::read_to_string(fixture(GOLDEN_PRE)).unwrap() == pre, "pre fixture is stale; rerun with {BLESS_ENV}=1");
    assert!(std::fs::read_to_string(fixture(GOLDEN_POST)).unwrap() == post, "post fixture is stale; rerun with {BLESS_ENV}=1");
}

#[test]
fn golden_eval_matches_to_1e6() {
    let golden = read_json(&fixture(GOLDEN_EVAL));
    let pre = parse_ply(&fixture(GOLDEN_PRE)).unwrap();
    let post = parse_ply(&fixture(GOLDEN_POST)).unwrap();
    let report = wrap_quality_r(&pre, &post, &EvalParams::default()).unwrap();
    let r = golden["eval"]["r"].as_f64().unwrap();
    assert!((report.r - r).abs() <= 1e-6, "r {} vs golden {r}", report.r);
    assert_eq!(report.m as u64, golden["eval"]["M"].as_u64().unwrap());
    assert_eq!(report.deviated as u64, golden["eval"]["deviated"].as_u64().unwrap());

    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("eval.json");
    let out = wrapkit(&[
        "eval",
        "--pre",
        fixture(GOLDEN_PRE).to_str().unwrap(),
        "--post",
        fixture(GOLDEN_POST).to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let line = String::from_utf8(out.stdout).unwrap();
    assert_eq!(line, format!("r={r:.6} M={} deviated={}\n", report.m, report.deviated));
    let written = read_json(&out_path);
    assert_eq!(written["eval"], golden["eval"]);
    assert_valid("eval_report", &written);
}

#[test]
fn run_reports_validate_and_echo_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [("params_default.json", 0, "wrapped-ok", 0), ("params_fail_b_once.json", 0, "wrapped-ok", 1), ("params_always_fail.json", 2, "aborted", 3)];
    for (params, code, verdict, restarts) in cases {
        let out_path = dir.path().join(format!("{params}.report.json"));
        let out = wrapkit(&[
            "run",
            "--config",
            config("paper_box.json").to_str().unwrap(),
            "--params",
            config(params).to_str().unwrap(),
            "--seed",
            "11",
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(code), "{params}: {}", String::from_utf8_lossy(&out.stderr));
        let report = read_json(&out_path);
        assert_valid("run_report", &report);
        assert_eq!(report["schema_version"], "1.0");
        assert_eq!(report["seed"], 11);
        assert_eq!(report["verdict"], verdict);
        assert_eq!(report["restarts"], restarts);
        assert_eq!(report["attempts"].as_array().unwrap().len(), restarts + 1);
        if let Some(r) = report["eval"]["r"].as_f64() {
            assert_eq!(r, wrapkit_cli::report::round6(r));
            assert!(r < report["params"]["r_threshold"].as_f64().unwrap());
        }
        let echoed: wrapkit::pipeline::PipelineParams = serde_json::from_value(report["params"].clone()).unwrap();
        let given: wrapkit::pipeline::PipelineParams =
            serde_json::from_str(&std::fs::read_to_string(config(params)).unwrap()).unwrap();
        assert_eq!(echoed, given);
    }
}

#[test]
fn shipped_configs_validate() {
    for name in ["paper_box.json", "paper_cylinder.json", "paper_box_bulged.json"] {
        let doc = read_json(&config(name));
        assert_valid("scene_config", &doc);
        let _: SceneConfig = serde_json::from_value(doc).unwrap();
    }
    for name in ["params_default.json", "params_fail_b_once.json", "params_always_fail.json"] {
        assert_valid("params", &read_json(&config(name)));
    }
    assert_valid("scene_config", &serde_json::to_value(SceneConfig::paper_box()).unwrap());
    assert_eq!(
        serde_json::from_value::<SceneConfig>(read_json(&config("paper_box.json"))).unwrap(),
        SceneConfig::paper_box()
    );
    let mut bad = read_json(&config("paper_box.json"));
    bad["density"] = (-1.0).into();
    assert!(!validator("scene_config").is_valid(&bad));
}

#[test]
fn synth_files_match_the_library_scene() {
    let dir = tempfile::tempdir().unwrap();
    let out = wrapkit(&["synth", "--preset", "paper-box", "--seed", "5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let mut config = SceneConfig::paper_box();
    config.seed = 5;
    let (_, cloud, image, gt) = synth_scene(&config).unwrap();
    assert_eq!(parse_ply(&dir.path().join("scene.ply")).unwrap(), cloud);
    let mut f = std::fs::File::open(dir.path().join("image.lookup")).unwrap();
    assert_eq!(read_lookup(&mut f).unwrap(), image);
    let pgm = std::fs::read(dir.path().join("image.pgm")).unwrap();
    let header = format!("P5\n{} {}\n255\n", image.width, image.height);
    assert_eq!(&pgm[..header.len()], header.as_bytes());
    assert_eq!(pgm[header.len()..], image.rgb.iter().map(Rgb::luma).collect::<Vec<_>>()[..]);
    let gt_json: wrapkit::synth::GroundTruth =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ground_truth.json")).unwrap()).unwrap();
    assert_eq!(gt_json, gt);
    let world = read_json(&dir.path().join("world.json"));
    assert_eq!(world["seed"], 5);
    assert_valid("scene_config", &world["config"]);
}

#[test]
fn call_seal_normal_on_flat_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = wrapkit(&["synth", "--preset", "paper-box", "--seed", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let cloud = dir.path().join("scene.ply");
    let out = wrapkit(&["call", "seal-normal", "--cloud", cloud.to_str().unwrap(), "--at", "0.25,-0.3,0.0", "--thre", "0.03"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let n: Vec<f64> = serde_json::from_slice(&out.stdout).unwrap();
    assert!(n[2] > (1.0f64).to_radians().cos(), "{n:?}");
    let out = wrapkit(&["call", "seal-normal", "--cloud", cloud.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn ply_round_trip_over_100_seeded_clouds() {
    for seed in 0..100 {
        let cloud = random_cloud(seed);
        let text = write_ply_string(&cloud);
        assert_eq!(parse_ply_str(&text).unwrap(), cloud, "seed {seed}");
        assert_eq!(write_ply_string(&parse_ply_str(&text).unwrap()), text);
    }
}

#[test]
fn ply_file_round_trip_of_1000_colored_points() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ply");
    let points: Vec<Vec3> = (0..1000).map(|i| Vec3::new(i as f64 * 1e-3, (i as f64).sin(), -(i as f64).sqrt())).collect();
    let colors = (0..1000).map(|i| Rgb::new((i % 256) as u8, (i / 4 % 256) as u8, 7)).collect();
    let cloud = PointCloud::with_colors(points, colors).unwrap();
    wrapkit_cli::ply::write_ply(&cloud, &path).unwrap();
    assert_eq!(parse_ply(&path).unwrap(), cloud);
    assert!(matches!(parse_ply(&dir.path().join("missing.ply")), Err(PlyError::Io(_))));
}

#[test]
fn binary_ply_file_is_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.ply");
    let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
    bytes.extend_from_slice(&[0x00, 0x00, 0x80, 0xbf, 0xff, 0xfe, 0x00, 0x01, 0xc3, 0x28, 0x00, 0x00]);
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(parse_ply(&path), Err(PlyError::Unsupported { line: 2, .. })));
}

proptest! {
    #[test]
    fn ply_round_trip_is_lossless(
        pts in prop::collection::vec((any::<f64>(), any::<f64>(), any::<f64>()), 0..50),
        colors in any::<bool>(),
    ) {
        let points: Vec<Vec3> = pts.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).filter(|p| p.iter().all(|v| v.is_finite())).collect();
        let cloud = if colors {
            let c = points.iter().enumerate().map(|(i, _)| Rgb::new(i as u8, 255 - i as u8, 3)).collect();
            PointCloud::with_colors(points, c).unwrap()
        } else {
            PointCloud::new(points)
        };
        prop_assert_eq!(parse_ply_str(&write_ply_string(&cloud)).unwrap(), cloud);
    }

    #[test]
    fn truncated_data_reports_first_missing_row(n in 1usize..30, keep in 0usize..30) {
        let keep = keep.min(n - 1);
        let cloud = PointCloud::new((0..n).map(|i| Vec3::new(i as f64, 0.5, -1.0)).collect());
        let text = write_ply_string(&cloud);
        let header_lines = text.lines().take_while(|l| *l != "end_header").count() + 1;
        let truncated: String = text.lines().take(header_lines + keep).map(|l| format!("{l}\n")).collect();
        match parse_ply_str(&truncated) {
            Err(PlyError::Data { row, line, .. }) => {
                prop_assert_eq!(row, keep + 1);
                prop_assert_eq!(line, header_lines + keep + 1);
            }
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }
}
