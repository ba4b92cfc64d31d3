//! The experiment document and its command-line overrides.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use shadowkit_core::seqcore::NormExp;

use crate::catalog::SystemSpec;
use crate::error::config_err;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    VerifyCl,
    VerifyEd,
    Shadow,
    ShadowPeriodic,
    ChainDemo,
    Robustness,
    Semiconj,
    SolverOracle,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::VerifyCl,
        Experiment::VerifyEd,
        Experiment::Shadow,
        Experiment::ShadowPeriodic,
        Experiment::ChainDemo,
        Experiment::Robustness,
        Experiment::Semiconj,
        Experiment::SolverOracle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::VerifyCl => "verify-cl",
            Experiment::VerifyEd => "verify-ed",
            Experiment::Shadow => "shadow",
            Experiment::ShadowPeriodic => "shadow-periodic",
            Experiment::ChainDemo => "chain-demo",
            Experiment::Robustness => "robustness",
            Experiment::Semiconj => "semiconj",
            Experiment::SolverOracle => "solver-oracle",
        }
    }

    fn default_system(&self) -> &'static str {
        match self {
            Experiment::VerifyEd | Experiment::Robustness => "linear_no_ed",
            Experiment::ChainDemo => "ms_product",
            Experiment::Semiconj => "weighted_shift_tanh",
            _ => "weighted_shift_linear",
        }
    }

    fn default_window(&self, sequence: bool) -> usize {
        match self {
            Experiment::VerifyEd if sequence => 24,
            Experiment::Robustness if sequence => 10,
            Experiment::ChainDemo => 8,
            Experiment::Semiconj => 45,
            Experiment::VerifyEd | Experiment::Robustness => 30,
            _ => 64,
        }
    }

    fn default_d(&self) -> Vec<f64> {
        match self {
            Experiment::ChainDemo => vec![1e-2, 1e-3, 1e-4],
            _ => vec![1e-4],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Acceptance thresholds. Every one is an upper bound on a measured quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Step error an exact trajectory may keep.
    pub exact: f64,
    /// Equation residuals, relative to `1 + ‖x‖`.
    pub residual: f64,
    /// Change of a value when the orbit truncation doubles.
    pub doubling: f64,
    pub inclusion: f64,
    /// Perron vs direct solve.
    pub oracle: f64,
    /// Slack on `M·d`-type bounds, relative.
    pub bound_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { exact: 1e-11, residual: 1e-9, doubling: 1e-10, inclusion: 1e-9, oracle: 1e-8, bound_slack: 1e-9 }
    }
}

/// One experiment run. Missing optional fields take per-experiment defaults, see [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub system: Option<SystemSpec>,
    /// Window half-width `N`: coordinates `-N..=N`.
    #[serde(default)]
    pub window: Option<usize>,
    /// `l^p` exponent; 2 for operator sequences and `inf` for maps when absent.
    #[serde(default)]
    pub p: Option<NormExp>,
    /// Single noise level; ignored when `d_sweep` is non-empty.
    #[serde(default)]
    pub d: Option<f64>,
    #[serde(default)]
    pub d_sweep: Vec<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Seeds per cell: `seed, seed + 1, ...`.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    /// Verification horizon.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Pseudotrajectory or orbit length.
    #[serde(default = "default_length")]
    pub length: usize,
    /// Periods for `shadow-periodic`.
    #[serde(default = "default_periods")]
    pub periods: Vec<usize>,
    /// Sample points for `verify-cl` and `semiconj`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Random points live on `[-radius, radius]` with coordinates in `[-amp, amp]`.
    #[serde(default = "default_radius")]
    pub radius: i64,
    #[serde(default = "default_amp")]
    pub amp: f64,
    /// Noise support half-width.
    #[serde(default = "default_support")]
    pub support: usize,
    /// Orbit truncation `T` for `semiconj`.
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    /// Operator perturbation size for `robustness` on sequences; half the budget when absent.
    #[serde(default)]
    pub eps: Option<f64>,
    /// Largest dimension and interval length for `solver-oracle`.
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Output directory.
    #[serde(default = "default_out")]
    pub out: String,
    /// Also write every trajectory to the JSON artifact.
    #[serde(default)]
    pub dump_trajectories: bool,
}

fn default_seed() -> u64 {
    7
}
fn default_seeds() -> usize {
    10
}
fn default_horizon() -> usize {
    40
}
fn default_length() -> usize {
    40
}
fn default_periods() -> Vec<usize> {
    vec![1, 5, 12]
}
fn default_samples() -> usize {
    20
}
fn default_radius() -> i64 {
    4
}
fn default_amp() -> f64 {
    1.0
}
fn default_support() -> usize {
    4
}
fn default_truncation() -> usize {
    30
}
fn default_max_dim() -> usize {
    6
}
fn default_max_len() -> usize {
    20
}
fn default_out() -> String {
    "out".into()
}

/// Sets `path` (dot-separated) in a JSON tree. The value is read as JSON when it parses, as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) =
        assignment.split_once('=').ok_or_else(|| config_err(format!("override `{assignment}` is not KEY=VALUE")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(config_err(format!("override key `{key}` is malformed")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(m) => m,
            _ => return Err(config_err(format!("override `{key}`: `{}` is not an object", parts[..i].join(".")))),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("loop returns on the last key")
}

impl ExperimentConfig {
    /// Defaults for `experiment` with nothing else set.
    pub fn for_experiment(experiment: Experiment) -> Self {
        Self::from_value(serde_json::json!({ "experiment": experiment })).expect("defaults deserialize")
    }

    pub fn from_value(v: Value) -> Result<Self> {
        serde_json::from_value(v).map_err(|e| config_err(e.to_string()))
    }

    /// Reads an optional file, applies the subcommand, overrides and seed, then validates and resolves.
    ///
    /// A file naming another experiment than the subcommand is an error.
    pub fn load(path: Option<&Path>, experiment: Experiment, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str::<Value>(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Map::new()),
        };
        let Value::Object(obj) = &mut doc else {
            return Err(config_err("config must be a JSON object"));
        };
        match obj.get("experiment") {
            Some(v) if v != &Value::String(experiment.as_str().into()) => {
                return Err(config_err(format!("config is for experiment {v}, not {experiment}")));
            }
            _ => {
                obj.insert("experiment".into(), Value::String(experiment.as_str().into()));
            }
        }
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        if let Some(s) = seed {
            doc["seed"] = Value::from(s);
        }
        Self::from_value(doc)?.resolve()
    }

    /// Fills per-experiment defaults and checks ranges.
    pub fn resolve(mut self) -> Result<Self> {
        let e = self.experiment;
        if self.system.is_none() && e != Experiment::SolverOracle {
            self.system = Some(SystemSpec::named(e.default_system()));
        }
        let sequence = self.system.as_ref().is_some_and(|s| s.name == "linear_no_ed");
        self.window.get_or_insert(e.default_window(sequence));
        self.p.get_or_insert(if sequence { NormExp::Two } else { NormExp::Inf });
        if self.d_sweep.is_empty() {
            self.d_sweep = match self.d {
                Some(d) => vec![d],
                None => e.default_d(),
            };
        }
        self.d = None;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let n = self.window.unwrap_or(0);
        if !(2..=4096).contains(&n) {
            return Err(config_err("window half-width must lie in [2, 4096]"));
        }
        if let Some(d) = self.d_sweep.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
            return Err(config_err(format!("noise level {d} outside (0, 1]")));
        }
        if !(1..=100_000).contains(&self.seeds) {
            return Err(config_err("seeds must lie in [1, 100000]"));
        }
        if !(1..=10_000).contains(&self.horizon) || !(2..=100_000).contains(&self.length) {
            return Err(config_err("horizon must lie in [1, 10000] and length in [2, 100000]"));
        }
        if self.periods.is_empty() || self.periods.iter().any(|m| !(1..=10_000).contains(m)) {
            return Err(config_err("periods must be non-empty with entries in [1, 10000]"));
        }
        if !(1..=100_000).contains(&self.samples) || !(1..=10_000).contains(&self.truncation) {
            return Err(config_err("samples and truncation must be at least 1"));
        }
        if self.radius < 0 || self.radius as usize > n || self.support > n {
            return Err(config_err("radius and support must fit inside the window"));
        }
        if !(self.amp > 0.0 && self.amp.is_finite()) {
            return Err(config_err("amp must be positive"));
        }
        if let Some(eps) = self.eps {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(config_err("eps must be finite and >= 0"));
            }
        }
        if !(1..=64).contains(&self.max_dim) || !(1..=10_000).contains(&self.max_len) {
            return Err(config_err("max_dim must lie in [1, 64] and max_len in [1, 10000]"));
        }
        let t = &self.tolerances;
        if [t.exact, t.residual, t.doubling, t.inclusion, t.oracle, t.bound_slack].iter().any(|x| !(*x >= 0.0)) {
            return Err(config_err("tolerances must be >= 0"));
        }
        if self.out.is_empty() {
            return Err(config_err("out must name a directory"));
        }
        Ok(())
    }

    /// Resolved half-width (after [`ExperimentConfig::resolve`]).
    pub fn window_half(&self) -> usize {
        self.window.unwrap_or(2)
    }

    /// Resolved norm exponent.
    pub fn norm(&self) -> NormExp {
        self.p.unwrap_or(NormExp::Inf)
    }

    /// Seeds of one cell.
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }
}
