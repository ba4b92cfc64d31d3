//! One runner per experiment. Each returns its checks and artifacts without touching the disk.

mod chain;
mod oracle;
mod periodic;
mod robustness;
mod semiconj;
mod shadow;
mod verify;

pub use robustness::perturb_sequence;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use shadowkit_core::seqcore::{NormExp, SeqVec, Window};
use shadowkit_core::systems::random_point;

use crate::catalog::{self, Built};
use crate::config::{Experiment, ExperimentConfig};
use crate::Result;

/// One acceptance check. `expected` is the verdict the check should reach; `None` marks a
/// measurement that is reported but decides nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub expected: Option<bool>,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, expected: Some(true), detail: detail.into() }
    }

    /// A check that is meant to come out negative.
    pub fn expect_fail(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Check { expected: Some(false), ..Check::new(name, pass, detail) }
    }

    pub fn info(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Check { expected: None, ..Check::new(name, pass, detail) }
    }

    pub fn ok(&self) -> bool {
        self.expected.is_none_or(|e| e == self.pass)
    }

    /// `PASS name: detail`, with the expectation spelled out when it is not a plain pass.
    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let note = match self.expected {
            Some(true) => String::new(),
            Some(false) if self.ok() => " (expected)".into(),
            Some(false) => " (expected FAIL)".into(),
            None => " (reported)".into(),
        };
        format!("{verdict} {}{note}: {}", self.name, self.detail)
    }
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub checks: Vec<Check>,
    /// CSV bytes.
    pub table: Vec<u8>,
    pub structures: Value,
    pub constants: Value,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(Check::ok)
    }

    /// 0 when every check came out as expected, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            0
        } else {
            2
        }
    }
}

/// Runs a resolved config.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    if cfg.experiment == Experiment::SolverOracle {
        return oracle::run(cfg);
    }
    let spec = cfg.system.as_ref().ok_or_else(|| crate::RunError::Config("no system given".into()))?;
    let built = catalog::build(spec, cfg.window_half(), cfg.norm())?;
    match cfg.experiment {
        Experiment::VerifyCl => verify::run_cl(cfg, &built),
        Experiment::VerifyEd => verify::run_ed(cfg, &built),
        Experiment::Shadow => shadow::run(cfg, built.as_map()?),
        Experiment::ShadowPeriodic => periodic::run(cfg, built.as_map()?),
        Experiment::ChainDemo => chain::run(cfg, built.as_map()?),
        Experiment::Robustness => robustness::run(cfg, &built),
        Experiment::Semiconj => semiconj::run(cfg, built.as_map()?),
        Experiment::SolverOracle => unreachable!("handled above"),
    }
}

pub(crate) fn system_name(cfg: &ExperimentConfig) -> String {
    cfg.system.as_ref().map(|s| s.name.clone()).unwrap_or_default()
}

pub(crate) fn start_point(cfg: &ExperimentConfig, w: Window, p: NormExp, seed: u64) -> SeqVec {
    random_point(w, p, cfg.radius, cfg.amp, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Cells `(d, seed)` in sweep order.
pub(crate) fn cells(cfg: &ExperimentConfig) -> Vec<(f64, u64)> {
    cfg.d_sweep.iter().flat_map(|d| cfg.seed_list().into_iter().map(move |s| (*d, s))).collect()
}

pub(crate) fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

/// Error text of a failed cell, empty on success.
pub(crate) fn err_text<T>(r: &Result<T>) -> String {
    match r {
        Ok(_) => String::new(),
        Err(e) => format!("{}: {e}", e.kind()),
    }
}

impl Built {
    pub(crate) fn constants(&self) -> Value {
        self.info().clone()
    }
}
