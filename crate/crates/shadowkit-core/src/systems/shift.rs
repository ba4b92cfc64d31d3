use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{invert_increasing, Diffeo, Modulus};
use crate::seqcore::{LinOp, NormExp, SeqVec, Window};
use crate::{Error, Result};

/// The scalar map `x -> slope * x + amp * tanh(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftBranch {
    pub slope: f64,
    pub amp: f64,
}

impl ShiftBranch {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.amp * libm::tanh(x)
    }

    pub fn d1(&self, x: f64) -> f64 {
        let c = libm::cosh(x);
        self.slope + self.amp / (c * c)
    }

    pub fn d2(&self, x: f64) -> f64 {
        let c = libm::cosh(x);
        -2.0 * self.amp * libm::tanh(x) / (c * c)
    }

    pub fn inv(&self, y: f64) -> f64 {
        if self.amp == 0.0 {
            return y / self.slope;
        }
        invert_increasing(|x| self.eval(x), |x| self.d1(x), y, y / self.slope)
    }
}

/// `f({x_k}) = {y_k}` with `y_{k+1} = a_k(x_k)`; `a_k` is `neg` for `k < 0` and `pos` for `k ≥ 0`.
#[derive(Debug, Clone)]
pub struct WeightedShift {
    window: Window,
    p: NormExp,
    neg: ShiftBranch,
    pos: ShiftBranch,
    lambda: f64,
    r: f64,
    m: f64,
    label: String,
}

/// Builds a weighted shift after checking the derivative ranges on the grid `[-10, 10]`.
///
/// Ranges are checked closed: the linear family sits on the boundary of the open ranges.
pub fn make_weighted_shift(
    neg: ShiftBranch,
    pos: ShiftBranch,
    lambda: f64,
    r: f64,
    m: f64,
    window: Window,
    p: NormExp,
) -> Result<WeightedShift> {
    if !(lambda > 0.0 && lambda < 1.0) || r <= 1.0 || m < 0.0 {
        return Err(Error::InvalidInput("need lambda in (0,1), R > 1, M >= 0".into()));
    }
    if neg.eval(0.0) != 0.0 || pos.eval(0.0) != 0.0 {
        return Err(Error::DerivativeRange("a_k(0) != 0".into()));
    }
    let tol = 1e-12;
    for i in 0..=20_000 {
        let x = -10.0 + i as f64 * 1e-3;
        let (dn, dp) = (neg.d1(x), pos.d1(x));
        if dn < 1.0 / lambda - tol || dn > r + tol {
            return Err(Error::DerivativeRange(alloc::format!("a'_k({x}) = {dn} outside [1/lambda, R] for k < 0")));
        }
        if dp < 1.0 / r - tol || dp > lambda + tol {
            return Err(Error::DerivativeRange(alloc::format!("a'_k({x}) = {dp} outside [1/R, lambda] for k >= 0")));
        }
        let dd = libm::fabs(neg.d2(x)).max(libm::fabs(pos.d2(x)));
        if dd > m + tol {
            return Err(Error::DerivativeRange(alloc::format!("|a''_k({x})| = {dd} > M = {m}")));
        }
    }
    let label = if neg.amp == 0.0 && pos.amp == 0.0 { "weighted_shift_linear" } else { "weighted_shift_tanh" };
    Ok(WeightedShift { window, p, neg, pos, lambda, r, m, label: label.into() })
}

impl WeightedShift {
    /// `a_k = 2x` for `k < 0`, `x/2` for `k ≥ 0`; `R = 2.5`.
    pub fn linear(window: Window, p: NormExp) -> Self {
        make_weighted_shift(
            ShiftBranch { slope: 2.0, amp: 0.0 },
            ShiftBranch { slope: 0.5, amp: 0.0 },
            0.5,
            2.5,
            0.0,
            window,
            p,
        )
        .expect("linear family is admissible")
    }

    /// `a_k = 2x + 0.1 tanh x` for `k < 0`, `x/2 - 0.05 tanh x` for `k ≥ 0`; `R = 2.5`, `M = 0.1`.
    pub fn tanh(window: Window, p: NormExp) -> Self {
        make_weighted_shift(
            ShiftBranch { slope: 2.0, amp: 0.1 },
            ShiftBranch { slope: 0.5, amp: -0.05 },
            0.5,
            2.5,
            0.1,
            window,
            p,
        )
        .expect("tanh family is admissible")
    }

    pub fn branch(&self, k: i64) -> &ShiftBranch {
        if k < 0 {
            &self.neg
        } else {
            &self.pos
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn second_derivative_bound(&self) -> f64 {
        self.m
    }

    fn inverse_coeffs(&self, y: &SeqVec) -> Vec<f64> {
        let w = self.window;
        let c = y.coeffs();
        (0..w.len())
            .map(|j| if j + 1 < w.len() { self.branch(w.index(j)).inv(c[j + 1]) } else { 0.0 })
            .collect()
    }
}

impl Diffeo for WeightedShift {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn window(&self) -> Window {
        self.window
    }

    fn p(&self) -> NormExp {
        self.p
    }

    fn forward(&self, x: &SeqVec) -> Result<SeqVec> {
        x.check_window(self.window)?;
        let w = self.window;
        let c = x.coeffs();
        let mut y = alloc::vec![0.0; w.len()];
        for j in 0..w.len() - 1 {
            y[j + 1] = self.branch(w.index(j)).eval(c[j]);
        }
        SeqVec::from_coeffs(w, y, x.p())
    }

    fn inverse(&self, y: &SeqVec) -> Result<SeqVec> {
        y.check_window(self.window)?;
        SeqVec::from_coeffs(self.window, self.inverse_coeffs(y), y.p())
    }

    fn dforward(&self, x: &SeqVec) -> Result<LinOp> {
        x.check_window(self.window)?;
        let w = self.window;
        let s = x.coeffs().iter().enumerate().map(|(j, xj)| self.branch(w.index(j)).d1(*xj)).collect();
        LinOp::shift_diag(w, w, 1, s)
    }

    fn dinverse(&self, y: &SeqVec) -> Result<LinOp> {
        y.check_window(self.window)?;
        let w = self.window;
        let x = self.inverse_coeffs(y);
        let s = (0..w.len())
            .map(|i| if i == 0 { 0.0 } else { 1.0 / self.branch(w.index(i - 1)).d1(x[i - 1]) })
            .collect();
        LinOp::shift_diag(w, w, -1, s)
    }

    fn deriv_bound(&self) -> f64 {
        self.r
    }

    fn modulus(&self) -> Modulus {
        if self.neg.amp == 0.0 && self.pos.amp == 0.0 {
            Modulus::Zero
        } else {
            Modulus::Linear(self.m)
        }
    }
}
