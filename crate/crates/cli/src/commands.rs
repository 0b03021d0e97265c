//! Command implementations and the exit-code contract.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success; `eval`: r below threshold; `run`: wrapped-ok |
//! | 1 | `eval`: r at or above threshold; `run`: wrapped-poor |
//! | 2 | `synth`/`eval`/`call`: file cannot be read or written; `run`: aborted |
//! | 3 | invalid config, parameters, arguments or `run` inputs |
//! | 4 | malformed PLY |

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;
use wrapkit::cloud::{estimate_normals, extract_plane, NormalParams, Orientation, PointCloud, RansacParams, DEFAULT_COLOR_TOL};
use wrapkit::evaluation::{wrap_quality_r, EvalParams, GOOD_R_THRESHOLD};
use wrapkit::geometry::Rgb;
use wrapkit::pipeline::{run_pipeline, PipelineParams, Verdict};
use wrapkit::recognition::{recog_seal_cmp, recog_target_bbox, seal_normal, TargetAnnotations};
use wrapkit::synth::{synth_scene, wrap_pair, SceneConfig, SEAL_COLOR};
use wrapkit::Vec3;

use crate::image_io::{write_lookup, write_pgm};
use crate::ply::{parse_ply, write_ply, PlyError};
use crate::report::{to_json, EvalJson, EvalParamsJson, EvalReportJson, RunReportJson, SCHEMA_VERSION};

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "WRAPKIT_SEED";

pub type ExitCode = i32;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Ply(#[from] PlyError),
}

impl CliError {
    pub fn code(&self) -> ExitCode {
        match self {
            CliError::Io(_) => 2,
            CliError::Invalid(_) => 3,
            CliError::Ply(PlyError::Io(_)) => 2,
            CliError::Ply(_) => 4,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "wrapkit", version, about = "Synthetic robotic wrapping: scenes, pipeline runs and wrap-quality evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a scene: scene.ply, image.pgm + image.lookup, ground_truth.json, world.json.
    Synth(SynthArgs),
    /// Evaluate wrap quality r between a pre- and a post-wrap cloud.
    Eval(EvalArgs),
    /// Run the full pipeline on a synthetic scene and write a JSON report.
    Run(RunArgs),
    /// Invoke a single recognition function on a PLY cloud and print JSON.
    Call(CallArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    PaperBox,
    PaperCylinder,
}

#[derive(Debug, Args)]
pub struct SceneSource {
    /// Scene config JSON.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in scene config.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub scene: SceneSource,
    /// Scene seed; defaults to the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write pre.ply and post.ply: the covered region before and after
    /// a complete cover with the config's bulge.
    #[arg(long)]
    pub pair: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Cloud captured before wrapping (ASCII PLY).
    #[arg(long)]
    pub pre: PathBuf,
    /// Cloud captured after wrapping (ASCII PLY).
    #[arg(long)]
    pub post: PathBuf,
    /// Neighbors per normal estimate.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Deviation angle threshold, degrees.
    #[arg(long, default_value_t = 10.0)]
    pub angle: f64,
    /// r below this is a good wrap (exit 0).
    #[arg(long, default_value_t = GOOD_R_THRESHOLD)]
    pub threshold: f64,
    /// Optional JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scene: SceneSource,
    /// Pipeline parameters JSON; missing fields take defaults.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Run seed; defaults to the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Function {
    /// RANSAC table plane.
    ExtractPlane,
    /// Target bounding box above the table plane.
    TargetBbox,
    /// Seal color component and mean point.
    SealCmp,
    /// Surface normal around `--at`; normals are estimated locally when the
    /// cloud has none.
    SealNormal,
}

#[derive(Debug, Args)]
pub struct CallArgs {
    pub function: Function,
    /// Input cloud (ASCII PLY).
    #[arg(long)]
    pub cloud: PathBuf,
    /// Query point `x,y,z` for seal-normal.
    #[arg(long, value_delimiter = ',')]
    pub at: Option<Vec<f64>>,
    /// Neighborhood radius for seal-normal, m.
    #[arg(long, default_value_t = 0.05)]
    pub thre: f64,
    /// Neighbors per normal estimate when the cloud has no normals.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Seal color `r,g,b` for seal-cmp.
    #[arg(long, value_delimiter = ',')]
    pub color: Option<Vec<u8>>,
    /// Plane inlier distance, m.
    #[arg(long, default_value_t = 0.005)]
    pub dist: f64,
    /// RANSAC seed for extract-plane and target-bbox [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Effective seed: `env` (the value of [`SEED_ENV`]) over `flag` over `fallback`.
pub fn resolve_seed(env: Option<&str>, flag: Option<u64>, fallback: u64) -> Result<u64, CliError> {
    match env {
        Some(s) => s.trim().parse().map_err(|_| CliError::Invalid(format!("{SEED_ENV}='{s}' is not a u64 seed"))),
        None => Ok(flag.unwrap_or(fallback)),
    }
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

fn load_scene(src: &SceneSource) -> Result<SceneConfig, CliError> {
    match (&src.config, src.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
        }
        (None, Some(Preset::PaperBox)) => Ok(SceneConfig::paper_box()),
        (None, Some(Preset::PaperCylinder)) => Ok(SceneConfig::paper_cylinder()),
        (None, None) => Err(CliError::Invalid("either --config or --preset is required".into())),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct WorldJson<'a> {
    schema_version: &'a str,
    seed: u64,
    config: &'a SceneConfig,
    world: &'a wrapkit::control::WorldState,
}

pub fn synth(args: &SynthArgs, env: Option<&str>) -> Result<ExitCode, CliError> {
    let mut config = load_scene(&args.scene)?;
    config.seed = resolve_seed(env, args.seed, config.seed)?;
    config.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
    let (world, cloud, image, gt) = synth_scene(&config).map_err(|e| CliError::Invalid(e.to_string()))?;

    fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    let out = |name: &str| args.out.join(name);
    write_ply(&cloud, &out("scene.ply"))?;
    let mut pgm = Vec::new();
    write_pgm(&image, &mut pgm).map_err(|e| io_err(&out("image.pgm"), e))?;
    write_file(&out("image.pgm"), &pgm)?;
    let path = out("image.lookup");
    let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = BufWriter::new(file);
    write_lookup(&image, &mut w).and_then(|_| w.flush()).map_err(|e| io_err(&path, e))?;
    write_file(&out("ground_truth.json"), to_json(&gt).as_bytes())?;
    let world_json = WorldJson { schema_version: SCHEMA_VERSION, seed: config.seed, config: &config, world: &world };
    write_file(&out("world.json"), to_json(&world_json).as_bytes())?;
    if args.pair {
        let (pre, post) = wrap_pair(&config).map_err(|e| CliError::Invalid(e.to_string()))?;
        write_ply(&pre, &out("pre.ply"))?;
        write_ply(&post, &out("post.ply"))?;
    }
    Ok(0)
}

/// Evaluates and writes the stdout line to `stdout`.
pub fn eval(args: &EvalArgs, stdout: &mut impl Write) -> Result<ExitCode, CliError> {
    let params = EvalParams { k: args.k, angle_thresh: args.angle, ..EvalParams::default() };
    params.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
    if !(args.threshold > 0.0 && args.threshold.is_finite()) {
        return Err(CliError::Invalid("threshold must be positive".into()));
    }
    let pre = parse_ply(&args.pre)?;
    let post = parse_ply(&args.post)?;
    let report = wrap_quality_r(&pre, &post, &params).map_err(|e| CliError::Invalid(e.to_string()))?;
    let good = report.is_good(args.threshold);
    writeln!(stdout, "r={:.6} M={} deviated={}", report.r, report.m, report.deviated)
        .map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(path) = &args.out {
        let json = EvalReportJson {
            schema_version: SCHEMA_VERSION.to_string(),
            pre: args.pre.display().to_string(),
            post: args.post.display().to_string(),
            params: EvalParamsJson { k: args.k, angle: args.angle, threshold: args.threshold },
            eval: EvalJson::from_report(&report),
            good,
        };
        write_file(path, to_json(&json).as_bytes())?;
    }
    Ok(if good { 0 } else { 1 })
}

/// Runs the pipeline. Every input or output problem maps to 3, since 2
/// means aborted here.
pub fn run(args: &RunArgs, env: Option<&str>) -> Result<ExitCode, CliError> {
    let invalid = |e: CliError| CliError::Invalid(e.to_string());
    let config = load_scene(&args.scene).map_err(invalid)?;
    let seed = resolve_seed(env, args.seed, config.seed)?;
    let params: PipelineParams = match &args.params {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?
        }
        None => PipelineParams::default(),
    };
    let report = run_pipeline(&config, &params, seed).map_err(|e| CliError::Invalid(e.to_string()))?;
    let json = RunReportJson::new(&report, &params);
    fs::write(&args.out, to_json(&json)).map_err(|e| CliError::Invalid(format!("{}: {e}", args.out.display())))?;
    Ok(match report.verdict {
        Verdict::WrappedOk => 0,
        Verdict::WrappedPoor => 1,
        Verdict::Aborted => 2,
    })
}

#[derive(Serialize)]
struct PlaneJson {
    normal: Vec3,
    offset: f64,
    inliers: usize,
}

pub fn call(args: &CallArgs, env: Option<&str>, stdout: &mut impl Write) -> Result<ExitCode, CliError> {
    let seed = resolve_seed(env, args.seed, 0)?;
    let cloud: PointCloud<f64> = parse_ply(&args.cloud)?;
    let failed = |e: &dyn std::fmt::Display| CliError::Invalid(e.to_string());
    for (flag, len) in [("--at", args.at.as_ref().map(Vec::len)), ("--color", args.color.as_ref().map(Vec::len))] {
        if len.is_some_and(|n| n != 3) {
            return Err(CliError::Invalid(format!("{flag} takes three comma-separated values")));
        }
    }
    let ransac = RansacParams { seed, ..RansacParams::default() };
    let json = match args.function {
        Function::ExtractPlane => {
            let (plane, inliers) = extract_plane(&cloud, args.dist, &ransac).map_err(|e| failed(&e))?;
            to_json(&PlaneJson { normal: plane.normal, offset: plane.offset, inliers: inliers.len() })
        }
        Function::TargetBbox => {
            let (plane, _) = extract_plane(&cloud, args.dist, &ransac).map_err(|e| failed(&e))?;
            let model = recog_target_bbox(&cloud, &plane, TargetAnnotations::default()).map_err(|e| failed(&e))?;
            to_json(&model)
        }
        Function::SealCmp => {
            let color = args.color.as_ref().map_or(SEAL_COLOR, |c| Rgb::new(c[0], c[1], c[2]));
            to_json(&recog_seal_cmp(&cloud, color, DEFAULT_COLOR_TOL).map_err(|e| failed(&e))?)
        }
        Function::SealNormal => {
            let at = args.at.as_ref().ok_or_else(|| CliError::Invalid("seal-normal needs --at x,y,z".into()))?;
            let pos = Vec3::new(at[0], at[1], at[2]);
            let cloud = if cloud.normals.is_some() {
                cloud
            } else {
                let r2 = (2.0 * args.thre).powi(2);
                let idx: Vec<usize> = (0..cloud.len()).filter(|&i| (cloud.points[i] - pos).norm_squared() <= r2).collect();
                let np = NormalParams { k: args.k, orientation: Orientation::TowardViewpoint(pos + Vec3::z()) };
                estimate_normals(&cloud.select(&idx), &np).map_err(|e| failed(&e))?
            };
            let n = seal_normal(&cloud, &pos, args.thre).map_err(|e| failed(&e))?;
            to_json(&n)
        }
    };
    stdout.write_all(json.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(0)
}

/// Dispatches a parsed command line.
pub fn execute(cli: &Cli) -> Result<ExitCode, CliError> {
    let env = env_seed();
    let mut stdout = std::io::stdout().lock();
    match &cli.command {
        Command::Synth(a) => synth(a, env.as_deref()),
        Command::Eval(a) => eval(a, &mut stdout),
        Command::Run(a) => run(a, env.as_deref()),
        Command::Call(a) => call(a, env.as_deref(), &mut stdout),
    }
}
