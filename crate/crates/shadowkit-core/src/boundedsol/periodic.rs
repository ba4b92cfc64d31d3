use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{sweep, BoundedSolution};
use crate::clstruct::{CLCertificate, ProjPair};
use crate::seqcore::{sup_norm, LinOp, NormExp, OperatorSeq, SeqVec, Window};
use crate::{Error, Result};

/// One period of an `m`-periodic problem: `A_0..A_{m-1}` and `w_0..w_{m-1}`, indices taken mod `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicProblem {
    pub ops: Vec<LinOp>,
    #[serde(default)]
    pub invs: Option<Vec<LinOp>>,
    pub forcing: Vec<SeqVec>,
}

impl PeriodicProblem {
    pub fn new(ops: Vec<LinOp>, forcing: Vec<SeqVec>) -> Result<Self> {
        let pp = PeriodicProblem { ops, invs: None, forcing };
        pp.check()?;
        Ok(pp)
    }

    pub fn with_inverses(mut self, invs: Vec<LinOp>) -> Result<Self> {
        if invs.len() != self.ops.len() {
            return Err(Error::InvalidInput("one inverse per operator".into()));
        }
        self.invs = Some(invs);
        self.check()?;
        Ok(self)
    }

    pub fn period(&self) -> usize {
        self.ops.len()
    }

    pub fn window(&self) -> Window {
        self.ops[0].domain()
    }

    pub fn p(&self) -> NormExp {
        self.forcing[0].p()
    }

    fn check(&self) -> Result<()> {
        if self.ops.is_empty() || self.ops.len() != self.forcing.len() {
            return Err(Error::InvalidInput("need one operator and one forcing vector per phase".into()));
        }
        let w = self.window();
        for op in self.ops.iter().chain(self.invs.iter().flatten()) {
            if op.domain() != w || op.codomain() != w {
                return Err(Error::WindowMismatch { expected: w, found: op.codomain() });
            }
        }
        for f in &self.forcing {
            f.check_window(w)?;
        }
        Ok(())
    }

    /// Wrapped step residuals of a candidate period.
    pub fn residuals(&self, v: &[SeqVec]) -> Result<Vec<f64>> {
        let m = self.period();
        if v.len() != m {
            return Err(Error::InvalidInput("candidate must hold one period".into()));
        }
        (0..m)
            .map(|k| {
                let k1 = (k + 1) % m;
                Ok(v[k1].sub(&self.ops[k].apply(&v[k])?)?.sub(&self.forcing[k1])?.norm())
            })
            .collect()
    }
}

/// Periodic solution from one projection pair per phase and the certificate constants.
///
/// The two-sided series is cut at `T` once `C²λ^T/(1-λ) W < 1e-12`.
pub fn periodic_green_solve_with(
    prob: &PeriodicProblem,
    pairs: &[ProjPair],
    c: f64,
    lambda: f64,
) -> Result<BoundedSolution> {
    let m = prob.period();
    if pairs.len() != m {
        return Err(Error::InvalidInput("need one projection pair per phase".into()));
    }
    let w_bound = sup_norm(&prob.forcing);
    let mut t = 0usize;
    if w_bound > 0.0 {
        while c * c * libm::pow(lambda, t as f64) / (1.0 - lambda) * w_bound >= 1e-12 {
            t += 1;
            if t > 100_000 {
                return Err(Error::NoConvergence("tail bound never drops below 1e-12".into()));
            }
        }
    }
    let reps = t.div_ceil(m) as i64 + 1;
    let mi = m as i64;
    let (a, b) = (-mi * reps, mi - 1 + mi * reps);
    let phase = |k: i64| k.rem_euclid(mi) as usize;
    let seq = OperatorSeq::new(a, (a..b).map(|k| prob.ops[phase(k)].clone()).collect())?;
    let invs: Vec<alloc::borrow::Cow<'_, LinOp>> = match &prob.invs {
        Some(iv) => (a..b).map(|k| alloc::borrow::Cow::Borrowed(&iv[phase(k)])).collect(),
        None => {
            let one: Vec<LinOp> = prob.ops.iter().map(|o| o.inverse()).collect::<Result<_>>()?;
            (a..b).map(|k| alloc::borrow::Cow::Owned(one[phase(k)].clone())).collect()
        }
    };
    let w: Vec<SeqVec> = ((a + 1)..=b).map(|k| prob.forcing[phase(k)].clone()).collect();
    let long_pairs: Vec<ProjPair> = (a..=b).map(|k| pairs[phase(k)].clone()).collect();
    let v_long = sweep(&seq, &invs, &w, &long_pairs, prob.p())?;
    let v: Vec<SeqVec> = v_long[(-a) as usize..(-a) as usize + m].to_vec();
    let residuals = prob.residuals(&v)?;
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(BoundedSolution { start: 0, sup_norm: sup_norm(&v), max_residual, residuals, v })
}

/// Periodic solution with the projections of an index certificate, which must repeat with the period.
pub fn periodic_green_solve(prob: &PeriodicProblem, cert: &CLCertificate) -> Result<BoundedSolution> {
    let m = prob.period() as i64;
    let pairs = cert.index_pairs(0, m - 1)?;
    for k in 0..m {
        for shift in [-m, m, 2 * m] {
            let other = cert.split.at_index(k + shift).ok_or_else(|| {
                Error::Certificate(alloc::format!("no projection at index {}", k + shift))
            })?;
            if other.p.max_abs_diff(&pairs[k as usize].p)? > 1e-12 {
                return Err(Error::Precondition("certificate projections are not periodic".into()));
            }
        }
    }
    periodic_green_solve_with(prob, &pairs, cert.c, cert.lambda)
}
