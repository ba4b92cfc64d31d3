use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{NormExp, Window};
use crate::{Error, Result};

/// A finitely supported sequence on a window, with its norm convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSeqVec", into = "RawSeqVec")]
pub struct SeqVec {
    window: Window,
    coeffs: Vec<f64>,
    p: NormExp,
}

#[derive(Serialize, Deserialize)]
struct RawSeqVec {
    lo: i64,
    coeffs: Vec<f64>,
    p: NormExp,
}

impl TryFrom<RawSeqVec> for SeqVec {
    type Error = Error;
    fn try_from(r: RawSeqVec) -> Result<Self> {
        if r.coeffs.is_empty() {
            return Err(Error::InvalidInput("empty coefficient array".into()));
        }
        let w = Window::new(r.lo, r.lo + r.coeffs.len() as i64 - 1)?;
        SeqVec::from_coeffs(w, r.coeffs, r.p)
    }
}

impl From<SeqVec> for RawSeqVec {
    fn from(v: SeqVec) -> Self {
        RawSeqVec { lo: v.window.lo, coeffs: v.coeffs, p: v.p }
    }
}

impl SeqVec {
    pub fn zeros(window: Window, p: NormExp) -> Self {
        SeqVec { window, coeffs: vec![0.0; window.len()], p }
    }

    pub fn from_coeffs(window: Window, coeffs: Vec<f64>, p: NormExp) -> Result<Self> {
        if coeffs.len() != window.len() {
            return Err(Error::InvalidInput(alloc::format!(
                "{} coefficients for a window of length {}",
                coeffs.len(),
                window.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(SeqVec { window, coeffs, p })
    }

    /// Builds without checks; callers guarantee the length.
    pub(crate) fn raw(window: Window, coeffs: Vec<f64>, p: NormExp) -> Self {
        debug_assert_eq!(coeffs.len(), window.len());
        SeqVec { window, coeffs, p }
    }

    pub fn from_fn(window: Window, p: NormExp, mut f: impl FnMut(i64) -> f64) -> Self {
        SeqVec { window, coeffs: window.indices().map(&mut f).collect(), p }
    }

    /// Unit vector `e_i`; zero if `i` is outside the window.
    pub fn unit(window: Window, i: i64, p: NormExp) -> Self {
        let mut v = Self::zeros(window, p);
        if let Some(k) = window.pos(i) {
            v.coeffs[k] = 1.0;
        }
        v
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn p(&self) -> NormExp {
        self.p
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient at index `i` (zero outside the window).
    pub fn get(&self, i: i64) -> f64 {
        self.window.pos(i).map_or(0.0, |k| self.coeffs[k])
    }

    pub fn set(&mut self, i: i64, x: f64) -> Result<()> {
        let k = self
            .window
            .pos(i)
            .ok_or_else(|| Error::InvalidInput(alloc::format!("index {i} outside window")))?;
        self.coeffs[k] = x;
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.p.norm(&self.coeffs)
    }

    pub fn with_p(mut self, p: NormExp) -> Self {
        self.p = p;
        self
    }

    pub fn check_window(&self, w: Window) -> Result<()> {
        if self.window != w {
            return Err(Error::WindowMismatch { expected: w, found: self.window });
        }
        Ok(())
    }

    fn zip(&self, other: &SeqVec, f: impl Fn(f64, f64) -> f64) -> Result<SeqVec> {
        other.check_window(self.window)?;
        Ok(SeqVec {
            window: self.window,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| f(*a, *b)).collect(),
            p: self.p,
        })
    }

    pub fn add(&self, other: &SeqVec) -> Result<SeqVec> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SeqVec) -> Result<SeqVec> {
        self.zip(other, |a, b| a - b)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &SeqVec) -> Result<SeqVec> {
        self.zip(other, |x, y| x + a * y)
    }

    pub fn scale(&self, a: f64) -> SeqVec {
        SeqVec { window: self.window, coeffs: self.coeffs.iter().map(|x| a * x).collect(), p: self.p }
    }

    pub fn map(&self, f: impl Fn(i64, f64) -> f64) -> SeqVec {
        let w = self.window;
        SeqVec {
            window: w,
            coeffs: self.coeffs.iter().enumerate().map(|(k, x)| f(w.index(k), *x)).collect(),
            p: self.p,
        }
    }

    pub fn dist(&self, other: &SeqVec) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    /// Largest absolute coefficient within `margin` indices of either window edge.
    pub fn boundary_mass(&self, margin: usize) -> f64 {
        let n = self.coeffs.len();
        let m = margin.min(n);
        let lo = self.coeffs[..m].iter();
        let hi = self.coeffs[n - m..].iter();
        lo.chain(hi).fold(0.0, |a, x| a.max(libm::fabs(*x)))
    }
}

/// Margin and threshold of the truncation guard.
pub const GUARD_MARGIN: usize = 2;
pub const GUARD_MASS: f64 = 1e-12;

/// Errors if `v` carries mass near the window boundary.
pub fn truncation_guard(v: &SeqVec, step: i64) -> Result<()> {
    let mass = v.boundary_mass(GUARD_MARGIN);
    if mass >= GUARD_MASS {
        return Err(Error::Truncation { step, mass, margin: GUARD_MARGIN });
    }
    Ok(())
}

/// Sup over a sequence of vectors.
pub fn sup_norm(vs: &[SeqVec]) -> f64 {
    vs.iter().fold(0.0, |m, v| m.max(v.norm()))
}
