use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shadowkit::config::Experiment;
use shadowkit::{io, run, ExperimentConfig, RunError};

#[derive(Parser)]
#[command(name = "shadowkit", version, about = "Hyperbolic splittings, shadowing and graph transforms on sequence spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a (C, λ)-structure on sampled points or an operator sequence.
    VerifyCl(Common),
    /// Contrast the structure with an exponential dichotomy.
    VerifyEd(Common),
    /// Lipschitz shadowing over a (d, seed) sweep.
    Shadow(Common),
    /// Periodic shadowing of noisy periodic orbits.
    ShadowPeriodic(Common),
    /// Periodic points near chain-recurrent samples.
    ChainDemo(Common),
    /// Graph-transform robustness under perturbation.
    Robustness(Common),
    /// Pointwise semi-conjugacies between a map and its perturbation.
    Semiconj(Common),
    /// Perron solver against the direct banded solve.
    SolverOracle(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (same as --override out=DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Set one config key, dotted for nested keys: --override tolerances.oracle=1e-9
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Command {
    fn split(self) -> (Experiment, Common) {
        match self {
            Command::VerifyCl(c) => (Experiment::VerifyCl, c),
            Command::VerifyEd(c) => (Experiment::VerifyEd, c),
            Command::Shadow(c) => (Experiment::Shadow, c),
            Command::ShadowPeriodic(c) => (Experiment::ShadowPeriodic, c),
            Command::ChainDemo(c) => (Experiment::ChainDemo, c),
            Command::Robustness(c) => (Experiment::Robustness, c),
            Command::Semiconj(c) => (Experiment::Semiconj, c),
            Command::SolverOracle(c) => (Experiment::SolverOracle, c),
        }
    }
}

fn fail(err: &RunError, out: Option<&Path>) -> ExitCode {
    println!("{}", err.to_json());
    eprintln!("error: {err}");
    if let Some(dir) = out {
        let _ = io::write_error(dir, err);
    }
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let (experiment, common) = Cli::parse().command.split();
    let mut overrides = common.overrides;
    if let Some(out) = &common.out {
        overrides.push(format!("out={}", serde_json::Value::from(out.display().to_string())));
    }
    let cfg = match ExperimentConfig::load(common.config.as_deref(), experiment, &overrides, common.seed) {
        Ok(c) => c,
        Err(e) => return fail(&e, common.out.as_deref()),
    };
    let out = PathBuf::from(&cfg.out);
    let outcome = match run(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(&e, Some(&out)),
    };
    if let Err(e) = io::write_outcome(&cfg, &outcome) {
        return fail(&e, None);
    }
    for c in &outcome.checks {
        println!("{}", c.line());
    }
    ExitCode::from(outcome.exit_code() as u8)
}
