use alloc::borrow::Cow;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_pairs, sweep, BoundedSolution, InhomProblem};
use crate::clstruct::{CLCertificate, ProjPair};
use crate::seqcore::{sup_norm, LinOp, OperatorSeq, SeqVec};
use crate::{Error, Result};

/// Iteration cap for the perturbation series.
pub const NEUMANN_CAP: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannSolution {
    pub solution: BoundedSolution,
    pub iterations: usize,
    /// Successive ratios of iterate differences.
    pub ratios: Vec<f64>,
    /// `max ‖B_k - A_k‖`.
    pub eps: f64,
    pub l: f64,
}

/// Solves the problem over `B_k` by iterating `v ← S(w + (B - A)v)`, with `S` the
/// Perron operator of the base sequence `A_k` and its projections.
///
/// Requires `max ‖B_k - A_k‖ < 1/(2L)`.
pub fn neumann_solve_with(
    prob_b: &InhomProblem,
    base: &OperatorSeq,
    pairs: &[ProjPair],
    l: f64,
) -> Result<NeumannSolution> {
    let (a, b) = prob_b.interval();
    if base.interval() != (a, b) {
        return Err(Error::InvalidInput("base and perturbed sequences on different intervals".into()));
    }
    check_pairs(prob_b, pairs)?;
    let p = prob_b.p();
    let deltas: Vec<LinOp> = (a..b).map(|k| prob_b.seq().op(k)?.sub(base.op(k)?)).collect::<Result<_>>()?;
    let eps = deltas.iter().map(|d| d.op_norm(p)).fold(0.0, f64::max);
    if eps >= 1.0 / (2.0 * l) {
        return Err(Error::Precondition(format!("perturbation {eps:e} not below 1/(2L) = {:e}", 0.5 / l)));
    }
    let invs: Vec<Cow<'_, LinOp>> = (a..b).map(|k| base.inv(k)).collect::<Result<_>>()?;
    let w = prob_b.forcing();
    let mut v = sweep(base, &invs, w, pairs, p)?;
    let mut ratios = Vec::new();
    let mut last = f64::NAN;
    for it in 1..=NEUMANN_CAP {
        let forcing: Vec<SeqVec> =
            (0..w.len()).map(|j| w[j].add(&deltas[j].apply(&v[j])?)).collect::<Result<_>>()?;
        let next = sweep(base, &invs, &forcing, pairs, p)?;
        let diff = next.iter().zip(&v).map(|(x, y)| x.dist(y)).collect::<Result<Vec<_>>>()?;
        let diff = diff.into_iter().fold(0.0, f64::max);
        if last.is_finite() && last > 0.0 {
            ratios.push(diff / last);
        }
        v = next;
        if diff <= 1e-14 * (1.0 + sup_norm(&v)) {
            return Ok(NeumannSolution { solution: BoundedSolution::from_parts(prob_b, v)?, iterations: it, ratios, eps, l });
        }
        last = diff;
    }
    Err(Error::NoConvergence(format!("perturbation series did not settle in {NEUMANN_CAP} steps")))
}

/// [`neumann_solve_with`] with index projections of a certificate for the base sequence.
pub fn neumann_perturbed_solve(prob_b: &InhomProblem, base: &OperatorSeq, cert: &CLCertificate) -> Result<NeumannSolution> {
    let (a, b) = prob_b.interval();
    neumann_solve_with(prob_b, base, &cert.index_pairs(a, b)?, cert.l_const())
}
