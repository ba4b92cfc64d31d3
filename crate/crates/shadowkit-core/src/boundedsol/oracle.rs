//! Randomized hyperbolic instances with a known splitting, for cross-checking solvers.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{banded_direct_solve, perron_solve, BoundedSolution, InhomProblem};
use crate::clstruct::{diagonal_certificate, CLCertificate};
use crate::seqcore::{LinOp, Mat, NormExp, OperatorSeq, SeqVec, Window};
use crate::{Error, Result};

/// Contraction rate of every generated block.
pub const ORACLE_LAMBDA: f64 = 0.5;

/// A random problem on `[start, start + len]` in dimension `dim`, hyperbolic for the coordinate split.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub prob: InhomProblem,
    pub cert: CLCertificate,
    pub dim: usize,
    pub split: usize,
}

fn scaled(m: Mat, target: f64) -> Mat {
    let n = crate::seqcore::dense_norm(&m, NormExp::Two);
    m * (target / n)
}

/// Block-diagonal operator: stable block of norm below `λ`, unstable block whose inverse has norm below `λ`.
fn hyperbolic_op(w: Window, split: usize, rng: &mut ChaCha8Rng) -> Result<LinOp> {
    let n = w.len();
    let mut m = Mat::zeros(n, n);
    let rnd = |r: usize, rng: &mut ChaCha8Rng| Mat::from_fn(r, r, |_, _| rng.gen_range(-1.0..1.0));
    if split > 0 {
        let s = scaled(rnd(split, rng), ORACLE_LAMBDA * rng.gen_range(0.3..0.95));
        m.view_mut((0, 0), (split, split)).copy_from(&s);
    }
    let u = n - split;
    if u > 0 {
        // 0.6 I plus a 0.4-ball keeps the block invertible with singular values in [0.2, 1]
        let near = Mat::identity(u, u) * 0.6 + scaled(rnd(u, rng), 0.4);
        let inv_u = (near * (ORACLE_LAMBDA * 0.9))
            .try_inverse()
            .ok_or_else(|| Error::NotInvertible("unstable block".into()))?;
        m.view_mut((split, split), (u, u)).copy_from(&inv_u);
    }
    LinOp::dense(w, w, m)
}

/// Seeded instance with forcing entries uniform in `[-1, 1]`.
pub fn hyperbolic_instance(dim: usize, split: usize, start: i64, len: usize, seed: u64) -> Result<OracleInstance> {
    if dim == 0 || split > dim || len == 0 {
        return Err(Error::InvalidInput("need dim ≥ 1, split ≤ dim and len ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Window::new(0, dim as i64 - 1)?;
    let ops = (0..len).map(|_| hyperbolic_op(w, split, &mut rng)).collect::<Result<Vec<_>>>()?;
    let seq = OperatorSeq::new(start, ops)?;
    let forcing: Vec<SeqVec> =
        (0..len).map(|_| SeqVec::from_fn(w, NormExp::Two, |_| rng.gen_range(-1.0..1.0))).collect();
    let prob = InhomProblem::new(seq, forcing)?;
    let cert = diagonal_certificate(w, |i| i < split as i64, ORACLE_LAMBDA, 4.0)?;
    Ok(OracleInstance { prob, cert, dim, split })
}

/// Sizes drawn from a seed: `dim ∈ [1, max_dim]`, `len ∈ [1, max_len]`, any split.
pub fn random_instance(max_dim: usize, max_len: usize, seed: u64) -> Result<OracleInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0a11_ce5e_ed00);
    let dim = rng.gen_range(1..=max_dim.max(1));
    let split = rng.gen_range(0..=dim);
    let len = rng.gen_range(1..=max_len.max(1));
    let start = rng.gen_range(-10i64..=10);
    hyperbolic_instance(dim, split, start, len, seed)
}

/// Perron sums against the direct banded solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub dim: usize,
    pub split: usize,
    pub len: usize,
    pub max_discrepancy: f64,
    pub perron_residual: f64,
    pub direct_residual: f64,
    pub sup_norm: f64,
}

pub fn compare_with_oracle(inst: &OracleInstance) -> Result<OracleComparison> {
    let (a, b) = inst.prob.interval();
    let pairs = inst.cert.index_pairs(a, b)?;
    let perron: BoundedSolution = perron_solve(&inst.prob, &inst.cert)?;
    let direct = banded_direct_solve(&inst.prob, &pairs[0], &pairs[pairs.len() - 1])?;
    Ok(OracleComparison {
        dim: inst.dim,
        split: inst.split,
        len: (b - a) as usize,
        max_discrepancy: perron.max_abs_diff(&direct)?,
        perron_residual: perron.max_residual,
        direct_residual: direct.max_residual,
        sup_norm: perron.sup_norm,
    })
}
