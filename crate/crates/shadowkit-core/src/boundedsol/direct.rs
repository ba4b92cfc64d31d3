use alloc::vec::Vec;

use super::{BoundedSolution, InhomProblem};
use crate::clstruct::ProjPair;
use crate::seqcore::{Mat, SeqVec};
use crate::{Error, Result};

/// Largest number of unknowns assembled densely.
pub const DIRECT_CAP: usize = 20_000;

const REFINE_STEPS: usize = 4;

/// Dense least-squares solve of the stacked system with `P_a v_a = 0` and `Q_b v_b = 0`.
///
/// Those end conditions are what the Perron sums satisfy when the forcing
/// vanishes outside the interval, so on instances with a trivial kernel the
/// two answers coincide. Meant as an oracle on small problems.
pub fn banded_direct_solve(prob: &InhomProblem, left: &ProjPair, right: &ProjPair) -> Result<BoundedSolution> {
    let (a, b) = prob.interval();
    let seq = prob.seq();
    let dims: Vec<usize> = (a..=b).map(|k| seq.window_at(k).map(|w| w.len())).collect::<Result<_>>()?;
    let offs: Vec<usize> = dims
        .iter()
        .scan(0usize, |acc, d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let unknowns: usize = dims.iter().sum();
    if unknowns > DIRECT_CAP {
        return Err(Error::SizeCap { unknowns, cap: DIRECT_CAP });
    }
    let (da, db) = (dims[0], dims[dims.len() - 1]);
    if left.window().len() != da || right.window().len() != db {
        return Err(Error::InvalidInput("end projections do not fit the end spaces".into()));
    }
    let rows = unknowns + db;
    let mut m = Mat::zeros(rows, unknowns);
    let mut rhs = nalgebra::DVector::<f64>::zeros(rows);
    let mut r0 = 0usize;
    for k in a..b {
        let j = (k - a) as usize;
        let op = seq.op(k)?.to_dense();
        let (n_out, n_in) = (dims[j + 1], dims[j]);
        for r in 0..n_out {
            m[(r0 + r, offs[j + 1] + r)] += 1.0;
            for c in 0..n_in {
                m[(r0 + r, offs[j] + c)] -= op[(r, c)];
            }
            rhs[r0 + r] = prob.w(k + 1).coeffs()[r];
        }
        r0 += n_out;
    }
    let pl = left.p.to_dense();
    for r in 0..da {
        for c in 0..da {
            m[(r0 + r, c)] = pl[(r, c)];
        }
    }
    r0 += da;
    let qr = right.q.to_dense();
    let ob = offs[offs.len() - 1];
    for r in 0..db {
        for c in 0..db {
            m[(r0 + r, ob + c)] = qr[(r, c)];
        }
    }
    let svd = m.clone().svd(true, true);
    let solve = |b: &nalgebra::DVector<f64>| svd.solve(b, 1e-13).map_err(|e| Error::NotInvertible(e.into()));
    let mut x = solve(&rhs)?;
    // the stacked system is badly conditioned when blocks expand strongly; refine against the residual
    for _ in 0..REFINE_STEPS {
        let r = &rhs - &m * &x;
        if r.amax() <= f64::EPSILON * rhs.amax() {
            break;
        }
        x += solve(&r)?;
    }
    let p = prob.p();
    let v = (a..=b)
        .map(|k| {
            let j = (k - a) as usize;
            SeqVec::from_coeffs(seq.window_at(k)?, x.as_slice()[offs[j]..offs[j] + dims[j]].to_vec(), p)
        })
        .collect::<Result<Vec<_>>>()?;
    BoundedSolution::from_parts(prob, v)
}
