use serde::Serialize;
use serde_json::json;
use shadowkit_core::clstruct::{
    unit_growth, verify_cl_diffeo, verify_cl_opseq, verify_dichotomy, CLCertificate, IndexFamily, Side,
    VerificationReport, VerifyOptions,
};
use shadowkit_core::seqcore::{NormExp, OperatorSeq};
use shadowkit_core::systems::{make_linear_example_seq, orbit_segment};
use shadowkit_core::Error;
use std::sync::Arc;

use super::{max_of, start_point, system_name, Check, Outcome};
use crate::catalog::{Built, MapSystem};
use crate::config::ExperimentConfig;
use crate::io::csv_bytes;
use crate::parallel::map_cells;
use crate::Result;

fn options(cfg: &ExperimentConfig) -> VerifyOptions {
    VerifyOptions { horizon: cfg.horizon, seed: cfg.seed, p: cfg.p, ..VerifyOptions::default() }
}

#[derive(Serialize)]
struct SampleRow {
    system: String,
    p: String,
    n_window: usize,
    sample: usize,
    x_norm: f64,
    max_proj_norm: f64,
    max_inclusion_residual: f64,
    worst_decay_ratio: f64,
    worst_stable_ratio: f64,
    worst_unstable_ratio: f64,
    pass: bool,
}

fn row(cfg: &ExperimentConfig, sample: usize, x_norm: f64, r: &VerificationReport) -> SampleRow {
    SampleRow {
        system: system_name(cfg),
        p: cfg.norm().to_string(),
        n_window: cfg.window_half(),
        sample,
        x_norm,
        max_proj_norm: r.max_proj_norm,
        max_inclusion_residual: r.max_inclusion_residual,
        worst_decay_ratio: r.worst_decay_ratio,
        worst_stable_ratio: r.worst_stable_ratio,
        worst_unstable_ratio: r.worst_unstable_ratio,
        pass: r.pass,
    }
}

pub(super) fn run_cl(cfg: &ExperimentConfig, built: &Built) -> Result<Outcome> {
    let opts = options(cfg);
    match built {
        Built::Map(m) => {
            let w = m.sys.window();
            let ids: Vec<usize> = (0..cfg.samples).collect();
            let reports = map_cells(&ids, |i| {
                let x = start_point(cfg, w, m.sys.p(), cfg.seed.wrapping_add(*i as u64));
                let o = VerifyOptions { first_sample: *i, ..opts.clone() };
                verify_cl_diffeo(m.sys.as_ref(), &m.cert, std::slice::from_ref(&x), &o).map(|r| (x.norm(), r))
            })
            .into_iter()
            .collect::<std::result::Result<Vec<_>, Error>>()?;
            let rows: Vec<SampleRow> = reports.iter().enumerate().map(|(i, (n, r))| row(cfg, i, *n, r)).collect();
            let failed = rows.iter().filter(|r| !r.pass).count();
            let mut checks = vec![Check::new(
                "cl_structure",
                failed == 0,
                format!(
                    "{} samples at (C, lambda) = ({}, {}), worst decay ratio {:.6e}, {failed} failing",
                    rows.len(),
                    m.cert.c,
                    m.cert.lambda,
                    max_of(rows.iter().map(|r| r.worst_decay_ratio))
                ),
            )];
            if let Some(c) = transported_constants(m) {
                checks.push(c);
            }
            let worst = reports.iter().find(|(_, r)| !r.pass).or(reports.first()).map(|(_, r)| r.clone());
            Ok(Outcome {
                checks,
                table: csv_bytes(&rows)?,
                structures: json!({ "worst_report": worst }),
                constants: built.constants(),
            })
        }
        Built::Sequence(s) => {
            let rep = verify_cl_opseq(&s.seq, &s.cert, &opts, None)?;
            let rows = vec![row(cfg, 0, 0.0, &rep)];
            Ok(Outcome {
                checks: vec![Check::new(
                    "cl_structure",
                    rep.pass,
                    format!("(C, lambda) = ({}, {}), worst decay ratio {:.6e}", s.cert.c, s.cert.lambda, rep.worst_decay_ratio),
                )],
                table: csv_bytes(&rows)?,
                structures: json!({ "report": rep }),
                constants: built.constants(),
            })
        }
    }
}

/// For `h ∘ f ∘ h^{-1}`: the certificate must carry `(λ, R₁² C)`.
fn transported_constants(m: &MapSystem) -> Option<Check> {
    let (r1, c) = m.conjugacy?;
    let want = r1 * r1 * c;
    let ok = (m.cert.c - want).abs() <= 1e-12 * want;
    Some(Check::new("transported_constants", ok, format!("C = {} vs R1^2 C = {want} (R1 = {r1})", m.cert.c)))
}

#[derive(Serialize)]
struct GrowthRow {
    m: i64,
    backward_growth: f64,
    expected_backward: f64,
    forward_growth: f64,
    expected_forward: f64,
}

pub(super) fn run_ed(cfg: &ExperimentConfig, built: &Built) -> Result<Outcome> {
    let opts = options(cfg);
    match built {
        Built::Sequence(s) => {
            let cl = verify_cl_opseq(&s.seq, &s.cert, &opts, None)?;
            let ed = verify_dichotomy(&s.seq, &s.cert, Side::Plus, &opts)?;
            // stable vectors at 0 pulled back to m < 0 grow like 2^{-m}
            let w = s.seq.window_at(s.seq.interval().0)?;
            let wide = make_linear_example_seq(w, (-21, 1))?;
            let p = cfg.norm();
            let rows = (-20i64..=-1)
                .map(|m| {
                    Ok(GrowthRow {
                        m,
                        backward_growth: unit_growth(&wide, m, 0, m, p)?,
                        expected_backward: 2f64.powi(-m as i32),
                        forward_growth: unit_growth(&wide, 0, m, m, p)?,
                        expected_forward: 2f64.powi(m as i32),
                    })
                })
                .collect::<std::result::Result<Vec<_>, Error>>()?;
            let exact = rows.iter().all(|r| r.backward_growth == r.expected_backward && r.forward_growth == r.expected_forward);
            let checks = vec![
                Check::new("cl_structure", cl.pass, format!("(C, lambda) = ({}, {})", s.cert.c, s.cert.lambda)),
                Check::expect_fail(
                    "dichotomy_on_z_plus",
                    ed.pass,
                    format!("reverse invariance residual {:?}", ed.max_reverse_residual),
                ),
                Check::new("witness_growth", exact, "backward growth 2^-m and forward 2^m exact for m in [-20, -1]"),
            ];
            Ok(Outcome {
                checks,
                table: csv_bytes(&rows)?,
                structures: json!({ "cl_report": cl, "dichotomy_report": ed }),
                constants: built.constants(),
            })
        }
        Built::Map(m) => run_ed_map(cfg, m, &opts),
    }
}

/// Along an orbit of a map: derivatives as an operator sequence, projections from the certificate.
fn run_ed_map(cfg: &ExperimentConfig, m: &MapSystem, opts: &VerifyOptions) -> Result<Outcome> {
    let sys = m.sys.as_ref();
    let x = start_point(cfg, sys.window(), sys.p(), cfg.seed);
    let orbit = orbit_segment(sys, &x, 0, cfg.length)?;
    let ops = orbit[..cfg.length].iter().map(|y| sys.dforward(y)).collect::<std::result::Result<Vec<_>, Error>>()?;
    let invs = orbit[1..].iter().map(|y| sys.dinverse(y)).collect::<std::result::Result<Vec<_>, Error>>()?;
    let seq = OperatorSeq::new(0, ops)?.with_inverses(invs)?;
    let pairs = orbit
        .iter()
        .map(|y| m.cert.split.at_point(y).ok_or_else(|| Error::Certificate("orbit leaves the certificate".into())))
        .collect::<std::result::Result<Vec<_>, Error>>()?;
    let cert = CLCertificate::new(m.cert.c, m.cert.lambda, m.cert.r, Arc::new(IndexFamily::new(0, pairs)?))?;
    let cl = verify_cl_opseq(&seq, &cert, opts, None)?;
    let ed = verify_dichotomy(&seq, &cert, Side::Full, opts)?;
    let rows = vec![row(cfg, 0, x.norm(), &cl)];
    let p: NormExp = cfg.norm();
    Ok(Outcome {
        checks: vec![
            Check::new("cl_structure", cl.pass, format!("along an orbit of length {} in l^{p}", cfg.length)),
            Check::info("dichotomy_along_orbit", ed.pass, format!("reverse invariance residual {:?}", ed.max_reverse_residual)),
        ],
        table: csv_bytes(&rows)?,
        structures: json!({ "cl_report": cl, "dichotomy_report": ed }),
        constants: m.info_value(),
    })
}
