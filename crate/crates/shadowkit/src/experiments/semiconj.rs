use serde::Serialize;
use serde_json::json;
use shadowkit_core::semiconj::{evaluate_point, h1_at, h2_at, ConjOptions, ConjSample, ConjugacyJob};
use shadowkit_core::systems::{Diffeo, PerturbKind, Perturbed};

use super::{max_of, start_point, Check, Outcome};
use crate::catalog::MapSystem;
use crate::config::ExperimentConfig;
use crate::io::csv_bytes;
use crate::parallel::map_cells;
use crate::Result;

#[derive(Serialize)]
struct Row {
    d: f64,
    point: usize,
    h1_norm: f64,
    h2_norm: f64,
    residual1: f64,
    residual2: f64,
    composition: f64,
    x_norm: f64,
    equivariance1: f64,
    h1_change: Option<f64>,
    h2_change: Option<f64>,
}

/// `g = f + (d/2) φ`, so `‖f - g‖_{C¹} ≤ d`, evaluated at `samples` points per noise level.
pub(super) fn run(cfg: &ExperimentConfig, m: &MapSystem) -> Result<Outcome> {
    let f = m.sys.as_ref();
    let gs = cfg
        .d_sweep
        .iter()
        .map(|d| Perturbed::new(m.sys.clone(), d / 2.0, PerturbKind::Ahead))
        .collect::<shadowkit_core::Result<Vec<_>>>()?;
    let jobs = cfg
        .d_sweep
        .iter()
        .zip(&gs)
        .map(|(d, g)| ConjugacyJob::new(f, g as &dyn Diffeo, m.cert.clone(), *d, cfg.truncation, ConjOptions::default()))
        .collect::<shadowkit_core::Result<Vec<_>>>()?;
    let doubled = jobs.iter().map(|j| j.with_truncation(2 * cfg.truncation)).collect::<shadowkit_core::Result<Vec<_>>>()?;
    let grid: Vec<(usize, usize)> = (0..jobs.len()).flat_map(|j| (0..cfg.samples).map(move |i| (j, i))).collect();
    let samples = map_cells(&grid, |(j, i)| {
        let x = start_point(cfg, f.window(), f.p(), cfg.seed.wrapping_add(*i as u64));
        evaluate_point(&jobs[*j], Some(&doubled[*j]), *i, &x)
    })
    .into_iter()
    .collect::<shadowkit_core::Result<Vec<ConjSample>>>()?;

    // g = f must give zero at the first sample
    let same = ConjugacyJob::new(f, f, m.cert.clone(), jobs[0].consts.d, cfg.truncation, ConjOptions::default())?;
    let x0 = start_point(cfg, f.window(), f.p(), cfg.seed);
    let trivial = h1_at(&same, &x0)?.value.is_zero() && h2_at(&same, &x0)?.value.is_zero();

    let rows: Vec<Row> = grid
        .iter()
        .zip(&samples)
        .map(|((j, _), s)| Row {
            d: jobs[*j].consts.d,
            point: s.row.point,
            h1_norm: s.row.h1_norm,
            h2_norm: s.row.h2_norm,
            residual1: s.row.residual1,
            residual2: s.row.residual2,
            composition: s.row.composition,
            x_norm: s.x_norm,
            equivariance1: s.equivariance1,
            h1_change: s.h1_change,
            h2_change: s.h2_change,
        })
        .collect();
    let tol = &cfg.tolerances;
    let bound_ok = rows.iter().zip(&grid).all(|(r, (j, _))| {
        let b = 2.0 * jobs[*j].consts.l * r.d * (1.0 + tol.bound_slack);
        r.h1_norm <= b && r.h2_norm <= b
    });
    let rel = |r: &Row, x: f64| x / (1.0 + r.x_norm);
    let res = max_of(rows.iter().map(|r| rel(r, r.residual1.max(r.residual2))));
    let equi = max_of(rows.iter().map(|r| rel(r, r.equivariance1)));
    let change = max_of(rows.iter().map(|r| r.h1_change.unwrap_or(0.0).max(r.h2_change.unwrap_or(0.0))));
    let largest = max_of(rows.iter().map(|r| r.h1_norm.max(r.h2_norm) / r.d));
    let checks = vec![
        Check::new("bound_2ld", bound_ok, format!("max |h_i|/d {largest:.6} <= 2L = {:.6}", 2.0 * jobs[0].consts.l)),
        Check::new("residuals", res <= tol.residual, format!("max relative residual {res:.3e}")),
        Check::new("equivariance", equi <= tol.residual, format!("h1 at x and f(x): {equi:.3e}")),
        Check::new("truncation_doubling", change <= tol.doubling, format!("max change {change:.3e} when T doubles")),
        Check::new("identical_maps", trivial, "g = f gives h1 = h2 = 0"),
        Check::info("composition", true, format!("max probe {:.3e}", max_of(rows.iter().map(|r| r.composition)))),
    ];
    let consts: Vec<_> = jobs.iter().map(|j| j.consts).collect();
    Ok(Outcome {
        checks,
        table: csv_bytes(&rows)?,
        structures: json!({ "samples": samples }),
        constants: json!({ "system": m.info_value(), "jobs": consts }),
    })
}
