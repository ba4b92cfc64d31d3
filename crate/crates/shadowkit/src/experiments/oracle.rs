use serde::Serialize;
use serde_json::json;
use shadowkit_core::boundedsol::{compare_with_oracle, random_instance, ORACLE_LAMBDA};

use super::{max_of, Check, Outcome};
use crate::config::ExperimentConfig;
use crate::io::csv_bytes;
use crate::parallel::map_cells;
use crate::Result;

#[derive(Serialize)]
struct Row {
    seed: u64,
    dim: usize,
    split: usize,
    len: usize,
    max_discrepancy: f64,
    perron_residual: f64,
    direct_residual: f64,
    sup_norm: f64,
}

/// Perron sums against the direct banded solve on random hyperbolic instances, one per seed.
pub(super) fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let seeds = cfg.seed_list();
    let rows = map_cells(&seeds, |seed| -> Result<Row> {
        let c = compare_with_oracle(&random_instance(cfg.max_dim, cfg.max_len, *seed)?)?;
        Ok(Row {
            seed: *seed,
            dim: c.dim,
            split: c.split,
            len: c.len,
            max_discrepancy: c.max_discrepancy,
            perron_residual: c.perron_residual,
            direct_residual: c.direct_residual,
            sup_norm: c.sup_norm,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let worst = max_of(rows.iter().map(|r| r.max_discrepancy));
    let checks = vec![Check::new(
        "oracle_agreement",
        worst <= cfg.tolerances.oracle,
        format!("{} instances, max discrepancy {worst:.3e} <= {:e}", rows.len(), cfg.tolerances.oracle),
    )];
    Ok(Outcome {
        checks,
        table: csv_bytes(&rows)?,
        structures: json!({ "instances": rows.len() }),
        constants: json!({ "lambda": ORACLE_LAMBDA, "max_dim": cfg.max_dim, "max_len": cfg.max_len }),
    })
}
