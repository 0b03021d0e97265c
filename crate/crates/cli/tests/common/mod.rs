#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use wrapkit::cloud::PointCloud;
use wrapkit::geometry::Rgb;
use wrapkit::Vec3;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().expect("repo root")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn config(name: &str) -> PathBuf {
    repo_root().join("configs").join(name)
}

pub fn wrapkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wrapkit"))
        .args(args)
        .env_remove("WRAPKIT_SEED")
        .output()
        .expect("spawn wrapkit")
}

fn load_schema(name: &str) -> Value {
    let path = repo_root().join("schemas").join(format!("{name}.schema.json"));
    serde_json::from_str(&std::fs::read_to_string(&path).expect("schema file")).expect("schema json")
}

/// Validator for a shipped schema, with the sibling schemas registered for
/// `$ref` resolution.
pub fn validator(name: &str) -> jsonschema::Validator {
    let mut opts = jsonschema::options();
    for sibling in ["params", "scene_config", "run_report", "eval_report"] {
        let schema = load_schema(sibling);
        let id = schema["$id"].as_str().expect("$id").to_string();
        opts = opts.with_resource(id, jsonschema::Resource::from_contents(schema).expect("schema resource"));
    }
    opts.build(&load_schema(name)).expect("valid schema")
}

pub fn assert_valid(name: &str, doc: &Value) {
    let v = validator(name);
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name} schema violations: {errors:#?}");
}

/// Seeded cloud with coordinates over several magnitudes, optional colors
/// and normals.
pub fn random_cloud(seed: u64) -> PointCloud<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..400);
    let coord = |rng: &mut ChaCha8Rng| {
        let scale = 10f64.powi(rng.random_range(-6..4));
        let v = rng.random_range(-1.0..1.0) * scale;
        if rng.random_bool(0.3) {
            format!("{v:.9e}").parse().expect("decimal")
        } else {
            v
        }
    };
    let points = (0..n).map(|_| Vec3::new(coord(&mut rng), coord(&mut rng), coord(&mut rng))).collect();
    let mut cloud = if rng.random_bool(0.5) {
        let colors = (0..n).map(|_| Rgb::new(rng.random(), rng.random(), rng.random())).collect();
        PointCloud::with_colors(points, colors).expect("parallel")
    } else {
        PointCloud::new(points)
    };
    if rng.random_bool(0.5) {
        let normals = (0..n)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        cloud.set_normals(normals).expect("parallel");
    }
    cloud
}
