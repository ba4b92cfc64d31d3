//! Bounded solutions of `v_{k+1} = A_k v_k + w_{k+1}`.

mod direct;
mod neumann;
mod oracle;
mod periodic;

pub use direct::{banded_direct_solve, DIRECT_CAP};
pub use neumann::{neumann_perturbed_solve, neumann_solve_with, NeumannSolution, NEUMANN_CAP};
pub use oracle::{compare_with_oracle, hyperbolic_instance, random_instance, OracleComparison, OracleInstance, ORACLE_LAMBDA};
pub use periodic::{periodic_green_solve, periodic_green_solve_with, PeriodicProblem};

use alloc::borrow::Cow;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clstruct::{CLCertificate, ProjPair};
use crate::seqcore::{sup_norm, LinOp, NormExp, OperatorSeq, SeqVec};
use crate::{Error, Result};

/// Operators on `[a, b]` with forcing `w_{a+1}, ..., w_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InhomProblem {
    seq: OperatorSeq,
    w: Vec<SeqVec>,
    w_bound: f64,
}

impl InhomProblem {
    pub fn new(seq: OperatorSeq, w: Vec<SeqVec>) -> Result<Self> {
        let (a, b) = seq.interval();
        if w.len() as i64 != b - a {
            return Err(Error::InvalidInput(format!("need {} forcing vectors, got {}", b - a, w.len())));
        }
        for (j, wk) in w.iter().enumerate() {
            wk.check_window(seq.window_at(a + 1 + j as i64)?)?;
        }
        let w_bound = sup_norm(&w);
        Ok(InhomProblem { seq, w, w_bound })
    }

    /// Zero forcing in exponent `p`.
    pub fn homogeneous(seq: OperatorSeq, p: NormExp) -> Result<Self> {
        let (a, b) = seq.interval();
        let w = ((a + 1)..=b).map(|k| seq.window_at(k).map(|w| SeqVec::zeros(w, p))).collect::<Result<_>>()?;
        InhomProblem::new(seq, w)
    }

    pub fn seq(&self) -> &OperatorSeq {
        &self.seq
    }

    pub fn interval(&self) -> (i64, i64) {
        self.seq.interval()
    }

    /// `w_k` for `k` in `[a+1, b]`.
    pub fn w(&self, k: i64) -> &SeqVec {
        &self.w[(k - self.seq.interval().0 - 1) as usize]
    }

    pub fn forcing(&self) -> &[SeqVec] {
        &self.w
    }

    pub fn w_bound(&self) -> f64 {
        self.w_bound
    }

    pub fn p(&self) -> NormExp {
        self.w.first().map_or(NormExp::Two, |w| w.p())
    }
}

/// Solution `v_a, ..., v_b` with its residual record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedSolution {
    pub start: i64,
    pub v: Vec<SeqVec>,
    pub sup_norm: f64,
    pub max_residual: f64,
    /// `‖v_{k+1} - A_k v_k - w_{k+1}‖` for `k` in `[a, b-1]`.
    pub residuals: Vec<f64>,
}

impl BoundedSolution {
    pub fn from_parts(prob: &InhomProblem, v: Vec<SeqVec>) -> Result<Self> {
        let residuals = residuals(prob, &v)?;
        let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
        Ok(BoundedSolution { start: prob.interval().0, sup_norm: sup_norm(&v), max_residual, residuals, v })
    }

    pub fn at(&self, k: i64) -> &SeqVec {
        &self.v[(k - self.start) as usize]
    }

    /// `max_residual ≤ 1e-10 (1 + sup_norm)`.
    pub fn residual_ok(&self) -> bool {
        self.max_residual <= 1e-10 * (1.0 + self.sup_norm)
    }

    /// Largest coordinate-wise difference from another solution on the same interval.
    pub fn max_abs_diff(&self, other: &BoundedSolution) -> Result<f64> {
        if self.start != other.start || self.v.len() != other.v.len() {
            return Err(Error::InvalidInput("solutions on different intervals".into()));
        }
        let mut m = 0.0f64;
        for (x, y) in self.v.iter().zip(&other.v) {
            y.check_window(x.window())?;
            for (a, b) in x.coeffs().iter().zip(y.coeffs()) {
                m = m.max(libm::fabs(a - b));
            }
        }
        Ok(m)
    }
}

/// Step residuals of a candidate solution.
pub fn residuals(prob: &InhomProblem, v: &[SeqVec]) -> Result<Vec<f64>> {
    let (a, b) = prob.interval();
    if v.len() as i64 != b - a + 1 {
        return Err(Error::InvalidInput("solution length does not match the interval".into()));
    }
    (a..b)
        .map(|k| {
            let j = (k - a) as usize;
            let r = v[j + 1].sub(&prob.seq.op(k)?.apply(&v[j])?)?.sub(prob.w(k + 1))?;
            Ok(r.norm())
        })
        .collect()
}

fn check_pairs(prob: &InhomProblem, pairs: &[ProjPair]) -> Result<()> {
    let (a, b) = prob.interval();
    if pairs.len() as i64 != b - a + 1 {
        return Err(Error::InvalidInput(format!("need {} projection pairs, got {}", b - a + 1, pairs.len())));
    }
    for (j, pr) in pairs.iter().enumerate() {
        let w = prob.seq.window_at(a + j as i64)?;
        if pr.window() != w {
            return Err(Error::WindowMismatch { expected: w, found: pr.window() });
        }
    }
    Ok(())
}

/// Perron solution from explicit projections at every index of the interval.
///
/// Computed by one causal and one anticausal sweep, which telescope the two sums.
pub fn perron_solve_with(prob: &InhomProblem, pairs: &[ProjPair]) -> Result<BoundedSolution> {
    check_pairs(prob, pairs)?;
    let (a, b) = prob.interval();
    let invs = (a..b).map(|k| prob.seq.inv(k)).collect::<Result<Vec<_>>>()?;
    let v = sweep(&prob.seq, &invs, &prob.w, pairs, prob.p())?;
    BoundedSolution::from_parts(prob, v)
}

/// `s_k = A_{k-1} s_{k-1} + P_k w_k`, `u_k = A_k^{-1}(u_{k+1} + Q_{k+1} w_{k+1})`, `v = s - u`.
pub(crate) fn sweep(
    seq: &OperatorSeq,
    invs: &[Cow<'_, LinOp>],
    w: &[SeqVec],
    pairs: &[ProjPair],
    p: NormExp,
) -> Result<Vec<SeqVec>> {
    let (a, b) = seq.interval();
    let n = (b - a + 1) as usize;
    let mut s: Vec<SeqVec> = Vec::with_capacity(n);
    s.push(SeqVec::zeros(seq.window_at(a)?, p));
    for j in 1..n {
        let prev = seq.ops()[j - 1].apply(&s[j - 1])?;
        s.push(prev.add(&pairs[j].p.apply(&w[j - 1])?)?);
    }
    let mut u: Vec<SeqVec> = alloc::vec![SeqVec::zeros(seq.window_at(b)?, p); n];
    for j in (0..n - 1).rev() {
        let rhs = u[j + 1].add(&pairs[j + 1].q.apply(&w[j])?)?;
        u[j] = invs[j].apply(&rhs)?;
    }
    s.iter().zip(&u).map(|(x, y)| x.sub(y)).collect()
}

/// Perron solution with projections drawn from the certificate by index.
pub fn perron_solve(prob: &InhomProblem, cert: &CLCertificate) -> Result<BoundedSolution> {
    let (a, b) = prob.interval();
    perron_solve_with(prob, &cert.index_pairs(a, b)?)
}

/// The two sums at one index, evaluated term by term. Slow; a cross-check for the sweeps.
pub fn perron_sum_at(prob: &InhomProblem, pairs: &[ProjPair], k: i64) -> Result<SeqVec> {
    check_pairs(prob, pairs)?;
    let (a, b) = prob.interval();
    let mut acc = SeqVec::zeros(prob.seq.window_at(k)?, prob.p());
    for i in (a + 1)..=b {
        let pr = &pairs[(i - a) as usize];
        if i <= k {
            acc = acc.add(&prob.seq.cocycle_apply(k, i, &pr.p.apply(prob.w(i))?)?)?;
        } else {
            acc = acc.sub(&prob.seq.cocycle_apply(k, i, &pr.q.apply(prob.w(i))?)?)?;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests;
