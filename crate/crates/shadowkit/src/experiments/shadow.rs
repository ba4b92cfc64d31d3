use serde::Serialize;
use serde_json::json;
use shadowkit_core::seqcore::Window;
use shadowkit_core::shadow::{make_pseudotrajectory, shadow, shadowing_constants, ShadowOptions, ShadowResult};

use super::{cells, err_text, max_of, start_point, system_name, Check, Outcome};
use crate::catalog::MapSystem;
use crate::config::ExperimentConfig;
use crate::io::csv_bytes;
use crate::parallel::map_cells;
use crate::Result;

#[derive(Serialize)]
pub(super) struct ShadowRow {
    pub system: String,
    pub p: String,
    pub n_window: usize,
    pub period: Option<usize>,
    pub d: f64,
    pub seed: u64,
    pub step_error: f64,
    pub sup_distance: f64,
    pub ratio: f64,
    pub iterations: usize,
    pub final_step_error: f64,
    /// Largest `e_{l+1}/e_l` over the refinements.
    pub worst_halving: f64,
    pub within_guarantee: bool,
    pub error: String,
}

impl ShadowRow {
    pub(super) fn new(cfg: &ExperimentConfig, period: Option<usize>, d: f64, seed: u64, r: &Result<ShadowResult>) -> Self {
        let base = ShadowRow {
            system: system_name(cfg),
            p: cfg.norm().to_string(),
            n_window: cfg.window_half(),
            period,
            d,
            seed,
            step_error: f64::NAN,
            sup_distance: f64::NAN,
            ratio: f64::NAN,
            iterations: 0,
            final_step_error: f64::NAN,
            worst_halving: f64::NAN,
            within_guarantee: false,
            error: err_text(r),
        };
        match r {
            Ok(s) => ShadowRow {
                step_error: s.d,
                sup_distance: s.sup_distance,
                ratio: s.ratio(),
                iterations: s.iterations,
                final_step_error: s.final_step_error,
                worst_halving: max_of(s.error_history.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0])),
                within_guarantee: s.within_guarantee,
                ..base
            },
            Err(_) => base,
        }
    }
}

/// Ratio, exactness and failure checks shared by the shadowing runs.
pub(super) fn shadow_checks(cfg: &ExperimentConfig, rows: &[ShadowRow], m: f64, bound_name: &str) -> Vec<Check> {
    let ok: Vec<&ShadowRow> = rows.iter().filter(|r| r.error.is_empty()).collect();
    let failed = rows.len() - ok.len();
    let bound = 2.0 * m * (1.0 + cfg.tolerances.bound_slack);
    let worst = max_of(ok.iter().map(|r| r.ratio));
    let worst_step = max_of(ok.iter().map(|r| r.final_step_error));
    let worst_halving = max_of(ok.iter().map(|r| r.worst_halving));
    vec![
        Check::new("all_cells_converged", failed == 0, format!("{failed} of {} cells failed", rows.len())),
        Check::new(bound_name, failed == 0 && worst <= bound, format!("max sup_distance/d {worst:.6} <= 2M = {}", 2.0 * m)),
        Check::new(
            "exact_orbits",
            failed == 0 && worst_step <= cfg.tolerances.exact,
            format!("max final step error {worst_step:.3e} <= {:e}", cfg.tolerances.exact),
        ),
        Check::info("halving", worst_halving <= 0.5 * (1.0 + 1e-6), format!("worst refinement factor {worst_halving:.4e}")),
    ]
}

pub(super) fn run(cfg: &ExperimentConfig, m: &MapSystem) -> Result<Outcome> {
    let sys = m.sys.as_ref();
    let consts = shadowing_constants(sys, &m.cert)?;
    let support = Window::symmetric(cfg.support);
    let cells = cells(cfg);
    let results = map_cells(&cells, |(d, seed)| -> Result<ShadowResult> {
        let x0 = start_point(cfg, sys.window(), sys.p(), *seed);
        let traj = make_pseudotrajectory(sys, &x0, cfg.length, *d, *seed, Some(support))?;
        Ok(shadow(sys, &traj, &m.cert, &ShadowOptions { target: cfg.tolerances.exact, ..ShadowOptions::default() })?)
    });
    let rows: Vec<ShadowRow> = cells.iter().zip(&results).map(|((d, s), r)| ShadowRow::new(cfg, None, *d, *s, r)).collect();
    let checks = shadow_checks(cfg, &rows, consts.m, "ratio_bound");
    let trajectories: Vec<_> = if cfg.dump_trajectories {
        results.iter().map(|r| r.as_ref().ok().map(|s| &s.trajectory)).collect()
    } else {
        Vec::new()
    };
    Ok(Outcome {
        checks,
        table: csv_bytes(&rows)?,
        structures: json!({ "shadowing_constants": consts, "trajectories": trajectories }),
        constants: json!({ "system": m.info_value(), "shadowing": consts }),
    })
}
