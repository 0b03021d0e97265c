//! The six-step wrapping sequence: recognize, act, judge each step and
//! restart from the initial world when a judge fails.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{estimate_normals, extract_plane, NormalParams, Orientation, Plane, PointCloud, RansacParams};
use crate::control::{
    cover_arc, grip_seal, hold_target, release_finger, retract, scoop_lift, simulate, Constraint, ControlError, Event,
    FailureInjection, Hand, ScoopParams, SimParams, Trajectory, WorldState,
};
use crate::evaluation::{wrap_quality_r, EvalParams, GOOD_R_THRESHOLD};
use crate::geometry::{ColoredBBox, CoverPlan, Face, OrientedBox, Roi, SealCmp, Side};
use crate::recognition::{
    predict_covered_cloud, recog_seal_cmp, recog_seal_target, recog_target_bbox, recog_wrapper_cbbox, seal_normal,
    update_poses, RecogError, SceneImage, SimilarityWeights, TargetAnnotations, TargetModel, UpdateEdge,
};
use crate::synth::{capture, initial_world, render_views, SceneConfig, SynthError};
use crate::Vec3;

/// Pipeline steps in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StepId {
    /// Preoperative recognition.
    A,
    /// Lifting the wrapper upward.
    B,
    /// Covering.
    C,
    /// Gripping the seal.
    D,
    /// Securing with the seal.
    E,
    /// Evaluation of the wrapping condition.
    F,
}

impl StepId {
    pub const ALL: [StepId; 6] = [StepId::A, StepId::B, StepId::C, StepId::D, StepId::E, StepId::F];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepVerdict {
    Success,
    Failure,
}

/// When the step's critical manipulation is forced to fail.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Injection {
    #[default]
    Never,
    /// Fail on these zero-based attempts.
    Attempts(Vec<usize>),
    Always,
    /// Fail with this probability each attempt.
    Probability(f64),
}

impl Injection {
    fn for_attempt(&self, attempt: usize) -> FailureInjection {
        match self {
            Injection::Never => FailureInjection::Never,
            Injection::Attempts(a) if a.contains(&attempt) => FailureInjection::Forced,
            Injection::Attempts(_) => FailureInjection::Never,
            Injection::Always => FailureInjection::Forced,
            Injection::Probability(p) => FailureInjection::Probability(*p),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiDefaults {
    /// Radius of the sphere around a hand, m.
    pub hand_radius: f64,
    /// Half-thickness of face regions, m.
    pub face_thickness: f64,
    /// Points needed inside a region for success.
    pub min_count: usize,
}

impl Default for RoiDefaults {
    fn default() -> Self {
        Self { hand_radius: 0.04, face_thickness: 0.03, min_count: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    pub weights: SimilarityWeights<f64>,
    /// Radius for the seal normal estimate, m.
    pub thre: f64,
    pub k: usize,
    /// Pull force while covering, N.
    pub force: f64,
    /// Degrees.
    pub angle_thresh: f64,
    pub r_threshold: f64,
    pub max_restarts: usize,
    pub roi: RoiDefaults,
    pub injection: BTreeMap<StepId, Injection>,
    pub update_edge: UpdateEdge,
    pub color_tol: u8,
    pub annotations: TargetAnnotations,
    pub scoop: ScoopParams,
    pub sim: SimParams,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            weights: SimilarityWeights::default(),
            thre: 0.05,
            k: 10,
            force: 4.0,
            angle_thresh: 10.0,
            r_threshold: GOOD_R_THRESHOLD,
            max_restarts: 3,
            roi: RoiDefaults::default(),
            injection: BTreeMap::new(),
            update_edge: UpdateEdge::default(),
            color_tol: crate::cloud::DEFAULT_COLOR_TOL,
            annotations: TargetAnnotations::default(),
            scoop: ScoopParams::default(),
            sim: SimParams::default(),
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidParams(m.to_string()));
        self.weights.validate().map_err(|e| PipelineError::InvalidParams(e.to_string()))?;
        if !(self.thre > 0.0 && self.force > 0.0 && self.k >= 3) {
            return bad("thre, force must be positive and k at least 3");
        }
        if !(self.angle_thresh > 0.0 && self.angle_thresh < 180.0) {
            return bad("angle threshold must be in (0, 180)");
        }
        if !(self.r_threshold > 0.0 && self.r_threshold <= 1.0) {
            return bad("r threshold must be in (0, 1]");
        }
        let r = &self.roi;
        if !(r.hand_radius > 0.0 && r.face_thickness > 0.0 && r.min_count >= 1) {
            return bad("ROI defaults must be positive");
        }
        if self.injection.values().any(|i| matches!(i, Injection::Probability(p) if !(0.0..=1.0).contains(p))) {
            return bad("injection probability must be in [0, 1]");
        }
        if !(self.sim.speed > 0.0 && self.sim.angular_speed > 0.0 && self.sim.slip_sigma >= 0.0) {
            return bad("simulation speeds must be positive");
        }
        self.sim.admittance.validate().map_err(|e| PipelineError::InvalidParams(e.to_string()))?;
        Ok(())
    }

    fn eval(&self) -> EvalParams<f64> {
        EvalParams { k: self.k, angle_thresh: self.angle_thresh, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("invalid pipeline parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Config(#[from] SynthError),
}

/// Region checked by a judge, resolved against the current models and hands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoiSpec {
    HandSphere { hand: Hand },
    Face { face: Face },
    HalfFace { face: Face, side: Side },
}

/// Which colored points a judge counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extract {
    Wrapper,
    Seal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub roi: RoiSpec,
    pub extract: Extract,
}

/// Success iff at least `min_count` extracted points lie in `roi`.
pub fn judge(roi: &Roi<f64>, extracted: &PointCloud<f64>, min_count: usize) -> StepVerdict {
    let mut n = 0;
    for p in &extracted.points {
        if roi.contains(p) {
            n += 1;
            if n >= min_count {
                return StepVerdict::Success;
            }
        }
    }
    StepVerdict::Failure
}

/// The success checks of a step; steps A and F have none.
pub fn step_checks(step: StepId, annotations: &TargetAnnotations) -> Vec<Check> {
    match step {
        StepId::A | StepId::F => Vec::new(),
        StepId::B => vec![Check { roi: RoiSpec::HandSphere { hand: Hand::Right }, extract: Extract::Wrapper }],
        StepId::C => vec![Check {
            roi: RoiSpec::HalfFace { face: Face::Abcd, side: Side::RobotRight },
            extract: Extract::Wrapper,
        }],
        StepId::D => vec![Check { roi: RoiSpec::HandSphere { hand: Hand::Left }, extract: Extract::Seal }],
        StepId::E => vec![
            Check { roi: RoiSpec::Face { face: annotations.seal }, extract: Extract::Seal },
            Check { roi: RoiSpec::HalfFace { face: annotations.seal, side: Side::RobotRight }, extract: Extract::Seal },
        ],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: Check,
    /// Extracted points inside the region.
    pub count: usize,
    pub verdict: StepVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: StepId,
    /// `None` for steps without checks.
    pub verdict: Option<StepVerdict>,
    /// Functions invoked, in order.
    pub calls: Vec<String>,
    pub checks: Vec<CheckRecord>,
    pub events: Vec<(f64, Event)>,
    /// Simulated seconds at step start.
    pub start: f64,
    /// Simulated seconds spent.
    pub duration: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub index: usize,
    pub steps: Vec<StepRecord>,
    /// First step whose judge failed.
    pub failed: Option<StepId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub r: f64,
    pub m: usize,
    pub deviated: usize,
    pub icp_rmse: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    WrappedOk,
    WrappedPoor,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub attempts: Vec<Attempt>,
    pub eval: Option<EvalSummary>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

impl RunReport {
    pub fn restarts(&self) -> usize {
        self.attempts.len().saturating_sub(1)
    }

    /// Whether the final attempt passed every judge.
    pub fn all_judges_passed(&self) -> bool {
        self.attempts.last().is_some_and(|a| {
            a.failed.is_none()
                && a.steps.last().is_some_and(|s| s.step == StepId::F)
                && a.steps.iter().all(|s| s.verdict != Some(StepVerdict::Failure))
        })
    }
}

/// Runs the full sequence on the scene of `config` with `seed` as the scene
/// and simulation seed. A failed judge restores the initial world and starts
/// over at step A, at most `max_restarts` times.
pub fn run_pipeline(config: &SceneConfig, params: &PipelineParams, seed: u64) -> Result<RunReport, PipelineError> {
    params.validate()?;
    let mut cfg = config.clone();
    cfg.seed = seed;
    cfg.validate()?;
    let initial = initial_world(&cfg)?;
    let mut attempts = Vec::new();
    for index in 0..=params.max_restarts {
        let mut run = Run { cfg: &cfg, params, seed, attempt: index, world: initial.clone(), steps: Vec::new(), calls: 0 };
        let outcome = run.execute();
        let steps = std::mem::take(&mut run.steps);
        match outcome {
            Outcome::Done(eval) => {
                attempts.push(Attempt { index, steps, failed: None });
                let verdict = if eval.r < params.r_threshold { Verdict::WrappedOk } else { Verdict::WrappedPoor };
                return Ok(RunReport { seed, attempts, eval: Some(eval), verdict, cause: None });
            }
            Outcome::Failed(step) => {
                log::info!("attempt {index} failed at step {step:?}");
                attempts.push(Attempt { index, steps, failed: Some(step) });
            }
            Outcome::Hard(step, cause) => {
                attempts.push(Attempt { index, steps, failed: Some(step) });
                return Ok(RunReport { seed, attempts, eval: None, verdict: Verdict::Aborted, cause: Some(cause) });
            }
        }
    }
    Ok(RunReport {
        seed,
        attempts,
        eval: None,
        verdict: Verdict::Aborted,
        cause: Some("restarts exhausted".to_string()),
    })
}

enum Outcome {
    Done(EvalSummary),
    Failed(StepId),
    Hard(StepId, String),
}

struct Models {
    target: TargetModel<f64>,
    wrapper: ColoredBBox<f64>,
    seal: SealCmp<f64>,
    pre: PointCloud<f64>,
}

struct Run<'a> {
    cfg: &'a SceneConfig,
    params: &'a PipelineParams,
    seed: u64,
    attempt: usize,
    world: WorldState,
    steps: Vec<StepRecord>,
    calls: u64,
}

fn sub_seed(seed: u64, attempt: usize, k: u64) -> u64 {
    let mut x = seed ^ (attempt as u64).wrapping_mul(0xD1B5_4A32_D192_ED03) ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 31;
    x.wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

impl Run<'_> {
    fn execute(&mut self) -> Outcome {
        let models = match self.step_a() {
            Ok(m) => m,
            Err(e) => return Outcome::Hard(StepId::A, e.to_string()),
        };
        for step in [StepId::B, StepId::C, StepId::D, StepId::E] {
            match self.control_step(step, &models) {
                Ok(StepVerdict::Success) => {}
                Ok(StepVerdict::Failure) => return Outcome::Failed(step),
                Err(StepError::Recognition(e)) => return Outcome::Hard(step, e.to_string()),
                Err(StepError::Control(e)) => {
                    self.current().cause = Some(e.to_string());
                    self.current().verdict = Some(StepVerdict::Failure);
                    return Outcome::Failed(step);
                }
            }
        }
        match self.step_f(&models) {
            Ok(eval) => Outcome::Done(eval),
            Err(e) => Outcome::Hard(StepId::F, e.to_string()),
        }
    }

    fn begin(&mut self, step: StepId) {
        self.steps.push(StepRecord {
            step,
            verdict: None,
            calls: Vec::new(),
            checks: Vec::new(),
            events: Vec::new(),
            start: self.world.time,
            duration: 0.0,
            cause: None,
        });
    }

    fn current(&mut self) -> &mut StepRecord {
        self.steps.last_mut().expect("a step is open")
    }

    fn call(&mut self, name: &str) {
        self.current().calls.push(name.to_string());
    }

    fn end(&mut self) {
        let t = self.world.time;
        let rec = self.current();
        rec.duration = t - rec.start;
    }

    fn observe(&mut self) -> Result<(PointCloud<f64>, SceneImage<f64>), RecogError> {
        self.calls += 1;
        let salt = sub_seed(self.seed, self.attempt, 1_000 + self.calls);
        let (cloud, _) = capture(&self.world, self.cfg, salt).map_err(|e| RecogError::Cloud(e.to_string()))?;
        let image = render_views(&self.world, self.cfg).map_err(|e| RecogError::Cloud(e.to_string()))?;
        Ok((cloud, image))
    }

    fn execute_traj(&mut self, traj: &Trajectory, injection: FailureInjection) {
        self.calls += 1;
        let seed = sub_seed(self.seed, self.attempt, self.calls);
        let (w, log) = simulate(&self.world, traj, &self.params.sim, seed, injection);
        self.world = w;
        self.current().events.extend(log.events);
    }

    fn injection(&self, step: StepId) -> FailureInjection {
        self.params.injection.get(&step).map_or(FailureInjection::Never, |i| i.for_attempt(self.attempt))
    }

    /// The true world as the planner sees it: hands and table as they are,
    /// target and sheet as recognized.
    fn belief(&self, models: &Models) -> WorldState {
        let mut b = self.world.clone();
        b.target = models.target.bbox;
        b.wrapper.cbbox = models.wrapper;
        b.wrapper.rest = models.wrapper;
        b
    }

    fn step_a(&mut self) -> Result<Models, RecogError> {
        self.begin(StepId::A);
        let (cloud, image) = self.observe()?;
        let tol = self.params.color_tol;
        self.call("extract_plane");
        let ransac = RansacParams { iterations: 200, seed: sub_seed(self.seed, self.attempt, 7) };
        let (table, _) = extract_plane(&cloud, 0.005, &ransac)?;
        let table: Plane<f64> = table.oriented_up(&Vec3::z());
        self.call("recog_target_bbox");
        let target = recog_target_bbox(&cloud, &table, self.params.annotations)?;
        self.call("recog_wrapper_cbbox");
        let wrapper = recog_wrapper_cbbox(&image, self.cfg.wrapper.color, tol)?;
        self.call("recog_seal_cmp");
        let seal = recog_seal_cmp(&cloud, self.cfg.seal.color, tol)?;
        self.call("predict_covered_cloud");
        let pre = predict_covered_cloud(&cloud, &target.bbox, &wrapper)?;
        self.end();
        Ok(Models { target, wrapper, seal, pre })
    }

    fn control_step(&mut self, step: StepId, models: &Models) -> Result<StepVerdict, StepError> {
        self.begin(step);
        let f = self.params.force;
        let plan = CoverPlan::new(&models.target.bbox, &models.wrapper).ok_or(RecogError::EmptyPrediction)?;
        let pull = -models.target.bbox.face(plan.entry).normal;
        let up = self.world.table.oriented_up(&Vec3::z()).normal;
        match step {
            StepId::B => {
                self.call("hold_target");
                let t = hold_target(&self.belief(models), self.params.annotations.hold, &pull)?;
                self.execute_traj(&t, FailureInjection::Never);
                self.call("scoop_lift");
                let edge = models.wrapper.edge_by_label("ab").map_err(|_| RecogError::NotFound("wrapper edge"))?;
                let t = scoop_lift(&self.belief(models), &edge, &self.params.scoop)?;
                self.execute_traj(&t, self.injection(step));
            }
            StepId::C => {
                let bottom = plan.entry.shared_edge(Face::Efgh).expect("side faces touch the bottom");
                let top = plan.entry.shared_edge(Face::Abcd).expect("side faces touch the top");
                self.call("cover_arc");
                let t = cover_arc(&self.belief(models), bottom, &(up * f), false)?;
                self.execute_traj(&t, self.injection(step));
                self.call("cover_arc");
                let t = cover_arc(&self.belief(models), top, &(pull * f), true)?;
                self.execute_traj(&t, FailureInjection::Never);
                self.call("release_finger");
                let t = release_finger(&self.belief(models), Constraint::Target)?;
                self.execute_traj(&t, FailureInjection::Never);
            }
            StepId::D => {
                self.call("retract");
                let t = retract(&self.belief(models), Hand::Left);
                self.execute_traj(&t, FailureInjection::Never);
                self.call("grip_seal");
                let t = grip_seal(&self.belief(models), &models.seal)?;
                self.execute_traj(&t, self.injection(step));
            }
            StepId::E => {
                let (cloud, image) = self.observe()?;
                self.call("recog_seal_target");
                let (pos, edge) = recog_seal_target(&image, &models.target.bbox, &models.wrapper, &self.params.weights)?;
                self.call("seal_normal");
                let normal = self.seal_normal(&cloud, &pos)?;
                self.call("release_finger");
                let c = Constraint::Seal { position: pos, normal, edge_dir: edge.direction };
                let t = release_finger(&self.belief(models), c)?;
                self.execute_traj(&t, self.injection(step));
            }
            StepId::A | StepId::F => unreachable!("steps without control"),
        }
        let verdict = self.run_checks(step, models)?;
        if step == StepId::E && verdict == StepVerdict::Success {
            for hand in [Hand::Right, Hand::Left] {
                self.call("retract");
                let t = retract(&self.belief(models), hand);
                self.execute_traj(&t, FailureInjection::Never);
            }
        }
        self.end();
        Ok(verdict)
    }

    fn seal_normal(&self, cloud: &PointCloud<f64>, pos: &Vec3) -> Result<Vec3, RecogError> {
        let r2 = (2.0 * self.params.thre).powi(2);
        let idx: Vec<usize> = (0..cloud.len()).filter(|&i| (cloud.points[i] - pos).norm_squared() <= r2).collect();
        let local = cloud.select(&idx);
        let np = NormalParams { k: self.params.k, orientation: Orientation::TowardViewpoint(pos + Vec3::z()) };
        let with_normals = estimate_normals(&local, &np)?;
        seal_normal(&with_normals, pos, self.params.thre)
    }

    fn run_checks(&mut self, step: StepId, models: &Models) -> Result<StepVerdict, RecogError> {
        let checks = step_checks(step, &self.params.annotations);
        let (cloud, _) = self.observe()?;
        let tol = self.params.color_tol;
        let mut verdict = StepVerdict::Success;
        for check in checks {
            self.call("judge");
            let color = match check.extract {
                Extract::Wrapper => models.wrapper.color,
                Extract::Seal => models.seal.color,
            };
            let extracted = cloud.filter_by_color(color, tol)?;
            let roi = self.resolve(&check.roi, &models.target.bbox);
            let count = roi.count_inside(&extracted.points);
            let v = judge(&roi, &extracted, self.params.roi.min_count);
            self.current().checks.push(CheckRecord { check, count, verdict: v });
            if v == StepVerdict::Failure {
                verdict = StepVerdict::Failure;
                break;
            }
        }
        self.current().verdict = Some(verdict);
        Ok(verdict)
    }

    fn resolve(&self, spec: &RoiSpec, target: &OrientedBox<f64>) -> Roi<f64> {
        let t = self.params.roi.face_thickness;
        match *spec {
            RoiSpec::HandSphere { hand } => {
                Roi::Sphere { center: self.world.hand(hand).pose.position, radius: self.params.roi.hand_radius }
            }
            RoiSpec::Face { face } => Roi::Face { quad: target.face(face), thickness: t },
            RoiSpec::HalfFace { face, side } => Roi::HalfFace { quad: target.face(face), side, thickness: t },
        }
    }

    fn step_f(&mut self, models: &Models) -> Result<EvalSummary, RecogError> {
        self.begin(StepId::F);
        let (cloud, image) = self.observe()?;
        self.call("update_poses");
        let upd = update_poses(&image, &models.target.bbox, &models.wrapper, &self.params.weights, self.params.update_edge);
        let target = OrientedBox { pose: upd.target, size: models.target.bbox.size };
        let wrapper = ColoredBBox { pose: upd.wrapper, ..models.wrapper };
        self.call("predict_covered_cloud");
        let post = predict_covered_cloud(&cloud, &target, &wrapper)?;
        self.call("wrap_quality_r");
        let rep = wrap_quality_r(&models.pre, &post, &self.params.eval()).map_err(|e| RecogError::Cloud(e.to_string()))?;
        self.end();
        Ok(EvalSummary { r: rep.r, m: rep.m, deviated: rep.deviated, icp_rmse: rep.icp_rmse })
    }
}

enum StepError {
    Recognition(RecogError),
    Control(ControlError),
}

impl From<RecogError> for StepError {
    fn from(e: RecogError) -> Self {
        StepError::Recognition(e)
    }
}

impl From<ControlError> for StepError {
    fn from(e: ControlError) -> Self {
        StepError::Control(e)
    }
}

impl<T: crate::Real> From<crate::cloud::CloudError<T>> for StepError {
    fn from(e: crate::cloud::CloudError<T>) -> Self {
        StepError::Recognition(e.into())
    }
}
