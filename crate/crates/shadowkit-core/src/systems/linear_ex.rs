use alloc::vec::Vec;

use crate::seqcore::{LinOp, OperatorSeq, Window};
use crate::{Error, Result};

/// `(A_k x)_m = x_m / 2` for `m ≤ k` and `2 x_m` for `m > k`, for `k in [a, b-1]`.
pub fn make_linear_example_seq(window: Window, interval: (i64, i64)) -> Result<OperatorSeq> {
    let (a, b) = interval;
    if b <= a {
        return Err(Error::InvalidInput("empty interval".into()));
    }
    let ops: Vec<LinOp> = (a..b)
        .map(|k| LinOp::diag_fn(window, |m| if m <= k { 0.5 } else { 2.0 }))
        .collect::<Result<_>>()?;
    let invs: Vec<LinOp> = (a..b)
        .map(|k| LinOp::diag_fn(window, |m| if m <= k { 2.0 } else { 0.5 }))
        .collect::<Result<_>>()?;
    OperatorSeq::new(a, ops)?.with_inverses(invs)
}

/// The natural projection `P_k` onto coordinates `m ≤ k`.
pub fn no_ed_projection(window: Window, k: i64) -> LinOp {
    LinOp::coordinate_projection(window, |m| m <= k)
}
