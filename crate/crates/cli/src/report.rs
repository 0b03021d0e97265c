//! JSON reports written by the `eval` and `run` commands.

use serde::{Deserialize, Serialize};
use wrapkit::evaluation::EvalReport;
use wrapkit::pipeline::{Attempt, EvalSummary, PipelineParams, RunReport, Verdict};

pub const SCHEMA_VERSION: &str = "1.0";

/// `r` to six decimal places.
pub fn round6(r: f64) -> f64 {
    (r * 1e6).round() / 1e6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalJson {
    pub r: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub deviated: usize,
    pub icp_rmse: f64,
}

impl EvalJson {
    pub fn from_summary(s: &EvalSummary) -> Self {
        Self { r: round6(s.r), m: s.m, deviated: s.deviated, icp_rmse: s.icp_rmse }
    }

    pub fn from_report(e: &EvalReport<f64>) -> Self {
        Self { r: round6(e.r), m: e.m, deviated: e.deviated, icp_rmse: e.icp_rmse }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReportJson {
    pub schema_version: String,
    pub seed: u64,
    pub params: PipelineParams,
    pub restarts: usize,
    pub attempts: Vec<Attempt>,
    pub eval: Option<EvalJson>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

impl RunReportJson {
    pub fn new(report: &RunReport, params: &PipelineParams) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            seed: report.seed,
            params: params.clone(),
            restarts: report.restarts(),
            attempts: report.attempts.clone(),
            eval: report.eval.as_ref().map(EvalJson::from_summary),
            verdict: report.verdict,
            cause: report.cause.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalParamsJson {
    pub k: usize,
    pub angle: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReportJson {
    pub schema_version: String,
    pub pre: String,
    pub post: String,
    pub params: EvalParamsJson,
    pub eval: EvalJson,
    pub good: bool,
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
