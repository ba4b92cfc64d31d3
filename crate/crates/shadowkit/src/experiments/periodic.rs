use serde_json::json;
use shadowkit_core::seqcore::Window;
use shadowkit_core::shadow::{perturb_periodic_orbit, shadow_periodic, shadowing_constants, ShadowOptions, ShadowResult};

use super::shadow::{shadow_checks, ShadowRow};
use super::{cells, Check, Outcome};
use crate::catalog::MapSystem;
use crate::config::ExperimentConfig;
use crate::io::csv_bytes;
use crate::parallel::map_cells;
use crate::Result;

/// Periodic pseudotrajectories around fixed points repeated `m` times.
pub(super) fn run(cfg: &ExperimentConfig, m: &MapSystem) -> Result<Outcome> {
    let sys = m.sys.as_ref();
    let consts = shadowing_constants(sys, &m.cert)?;
    let support = Window::symmetric(cfg.support);
    let opts = ShadowOptions { target: cfg.tolerances.exact, ..ShadowOptions::default() };
    let grid: Vec<(usize, f64, u64)> =
        cfg.periods.iter().flat_map(|p| cells(cfg).into_iter().map(move |(d, s)| (*p, d, s))).collect();
    let results = map_cells(&grid, |(period, d, seed)| -> Result<ShadowResult> {
        let fixed = m.fixed_point(cfg.radius, *seed)?;
        let traj = perturb_periodic_orbit(sys, &vec![fixed; *period], *d, *seed, Some(support))?;
        Ok(shadow_periodic(sys, &traj, &m.cert, &opts)?)
    });
    let rows: Vec<ShadowRow> =
        grid.iter().zip(&results).map(|((p, d, s), r)| ShadowRow::new(cfg, Some(*p), *d, *s, r)).collect();
    let mut checks = shadow_checks(cfg, &rows, consts.m, "periodic_ratio_bound");
    let periods_kept = grid.iter().zip(&results).all(|((p, _, _), r)| r.as_ref().is_ok_and(|s| s.periodic && s.trajectory.len() == *p));
    checks.push(Check::new("periodic_orbits", periods_kept, "every shadow keeps the period of its pseudotrajectory"));
    Ok(Outcome {
        checks,
        table: csv_bytes(&rows)?,
        structures: json!({ "shadowing_constants": consts }),
        constants: json!({ "system": m.info_value(), "shadowing": consts }),
    })
}
