use serde::Serialize;
use serde_json::json;
use shadowkit_core::seqcore::Window;
use shadowkit_core::shadow::{periodic_point_near, perturb_periodic_orbit, shadowing_constants, PeriodicPoint, ShadowOptions};

use super::{cells, err_text, max_of, Check, Outcome};
use crate::catalog::MapSystem;
use crate::config::ExperimentConfig;
use crate::io::csv_bytes;
use crate::parallel::map_cells;
use crate::Result;

#[derive(Serialize)]
struct ChainRow {
    d: f64,
    seed: u64,
    loop_length: usize,
    /// Largest step error of the pseudo-loop, the wrap included.
    loop_step_error: f64,
    /// From the periodic point to the loop start.
    distance: f64,
    bound: f64,
    distance_to_sample: f64,
    ratio: f64,
    iterations: usize,
    error: String,
}

/// A fixed point is chain recurrent; a noisy loop around it closes onto a periodic point within `M d` of the loop start.
pub(super) fn run(cfg: &ExperimentConfig, m: &MapSystem) -> Result<Outcome> {
    let sys = m.sys.as_ref();
    let consts = shadowing_constants(sys, &m.cert)?;
    let support = Window::symmetric(cfg.support);
    let opts = ShadowOptions { target: cfg.tolerances.exact, ..ShadowOptions::default() };
    let cells = cells(cfg);
    let results = map_cells(&cells, |(d, seed)| -> Result<(PeriodicPoint, f64)> {
        let sample = m.fixed_point(cfg.radius, *seed)?;
        let noisy = perturb_periodic_orbit(sys, &vec![sample.clone(); cfg.length], *d, *seed, Some(support))?;
        let pp = periodic_point_near(sys, &m.cert, noisy.points, &opts)?;
        let to_sample = pp.point.dist(&sample)?;
        Ok((pp, to_sample))
    });
    let rows: Vec<ChainRow> = cells
        .iter()
        .zip(&results)
        .map(|((d, seed), r)| {
            let (step, dist, to_sample, it) = match r {
                Ok((pp, s)) => (pp.result.d, pp.distance, *s, pp.result.iterations),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN, 0),
            };
            ChainRow {
                d: *d,
                seed: *seed,
                loop_length: cfg.length,
                loop_step_error: step,
                distance: dist,
                bound: consts.m * step,
                distance_to_sample: to_sample,
                ratio: if step > 0.0 { dist / step } else { 0.0 },
                iterations: it,
                error: err_text(r),
            }
        })
        .collect();
    let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
    let worst = max_of(rows.iter().filter(|r| r.error.is_empty()).map(|r| r.ratio));
    let exact = max_of(results.iter().flatten().map(|(pp, _)| pp.result.final_step_error));
    let checks = vec![
        Check::new("all_cells_converged", failed == 0, format!("{failed} of {} loops failed", rows.len())),
        Check::new(
            "periodic_point_within_md",
            failed == 0 && worst <= consts.m * (1.0 + cfg.tolerances.bound_slack),
            format!("max distance/d {worst:.4e} <= M = {}", consts.m),
        ),
        Check::new("exact_periodic_points", failed == 0 && exact <= cfg.tolerances.exact, format!("max step error {exact:.3e}")),
    ];
    Ok(Outcome {
        checks,
        table: csv_bytes(&rows)?,
        structures: json!({ "shadowing_constants": consts }),
        constants: json!({ "system": m.info_value(), "shadowing": consts }),
    })
}
