use alloc::string::String;
use alloc::sync::Arc;

use super::{fit_modulus, invert_increasing, Diffeo, Modulus};
use crate::seqcore::{LinOp, NormExp, SeqVec, Window};
use crate::{Error, Result};

/// Coordinate-wise `x_k -> x_k + eps sin(x_k)` with `|eps| < 1`.
#[derive(Debug, Clone)]
pub struct CoordSine {
    window: Window,
    p: NormExp,
    eps: f64,
}

impl CoordSine {
    pub fn new(window: Window, p: NormExp, eps: f64) -> Result<Self> {
        if !(libm::fabs(eps) < 1.0) {
            return Err(Error::InvalidInput("need |eps| < 1".into()));
        }
        Ok(CoordSine { window, p, eps })
    }

    fn inv1(&self, y: f64) -> f64 {
        if self.eps == 0.0 {
            return y;
        }
        invert_increasing(|u| u + self.eps * libm::sin(u), |u| 1.0 + self.eps * libm::cos(u), y, y)
    }
}

impl Diffeo for CoordSine {
    fn name(&self) -> String {
        alloc::format!("coord_sine({})", self.eps)
    }

    fn window(&self) -> Window {
        self.window
    }

    fn p(&self) -> NormExp {
        self.p
    }

    fn forward(&self, x: &SeqVec) -> Result<SeqVec> {
        x.check_window(self.window)?;
        Ok(x.map(|_, u| u + self.eps * libm::sin(u)))
    }

    fn inverse(&self, y: &SeqVec) -> Result<SeqVec> {
        y.check_window(self.window)?;
        Ok(y.map(|_, v| self.inv1(v)))
    }

    fn dforward(&self, x: &SeqVec) -> Result<LinOp> {
        x.check_window(self.window)?;
        LinOp::diag(self.window, x.coeffs().iter().map(|u| 1.0 + self.eps * libm::cos(*u)).collect())
    }

    fn dinverse(&self, y: &SeqVec) -> Result<LinOp> {
        y.check_window(self.window)?;
        LinOp::diag(self.window, y.coeffs().iter().map(|v| 1.0 / (1.0 + self.eps * libm::cos(self.inv1(*v)))).collect())
    }

    fn deriv_bound(&self) -> f64 {
        1.0 / (1.0 - libm::fabs(self.eps))
    }

    fn couples_coordinates(&self) -> bool {
        false
    }

    fn modulus(&self) -> Modulus {
        if self.eps == 0.0 {
            Modulus::Zero
        } else {
            Modulus::Linear(libm::fabs(self.eps))
        }
    }
}

/// `g = h ∘ f ∘ h^{-1}`.
pub struct Conjugated {
    base: Arc<dyn Diffeo>,
    h: Arc<dyn Diffeo>,
    modulus: Modulus,
}

/// Conjugates `sys` by `h`. The modulus of the result is fitted empirically.
pub fn conjugate(sys: Arc<dyn Diffeo>, h: Arc<dyn Diffeo>) -> Result<Conjugated> {
    if sys.window() != h.window() {
        return Err(Error::WindowMismatch { expected: sys.window(), found: h.window() });
    }
    let mut g = Conjugated { base: sys, h, modulus: Modulus::Zero };
    g.modulus = if g.base.modulus().is_zero() && g.h.modulus().is_zero() {
        Modulus::Zero
    } else {
        fit_modulus(&g, 0x5eed, 64)?
    };
    Ok(g)
}

impl Conjugated {
    pub fn base(&self) -> &Arc<dyn Diffeo> {
        &self.base
    }

    pub fn h(&self) -> &Arc<dyn Diffeo> {
        &self.h
    }

    /// `R₁` with `‖Dh‖, ‖Dh^{-1}‖ ≤ R₁`.
    pub fn r1(&self) -> f64 {
        self.h.deriv_bound()
    }
}

impl Diffeo for Conjugated {
    fn name(&self) -> String {
        alloc::format!("conjugated:{}", self.base.name())
    }

    fn window(&self) -> Window {
        self.base.window()
    }

    fn p(&self) -> NormExp {
        self.base.p()
    }

    fn forward(&self, x: &SeqVec) -> Result<SeqVec> {
        self.h.forward(&self.base.forward(&self.h.inverse(x)?)?)
    }

    fn inverse(&self, y: &SeqVec) -> Result<SeqVec> {
        self.h.forward(&self.base.inverse(&self.h.inverse(y)?)?)
    }

    fn dforward(&self, x: &SeqVec) -> Result<LinOp> {
        let u = self.h.inverse(x)?;
        let fu = self.base.forward(&u)?;
        let a = self.h.dforward(&fu)?;
        a.compose(&self.base.dforward(&u)?)?.compose(&self.h.dinverse(x)?)
    }

    fn dinverse(&self, y: &SeqVec) -> Result<LinOp> {
        let u = self.h.inverse(y)?;
        let fu = self.base.inverse(&u)?;
        let a = self.h.dforward(&fu)?;
        a.compose(&self.base.dinverse(&u)?)?.compose(&self.h.dinverse(y)?)
    }

    fn deriv_bound(&self) -> f64 {
        let r1 = self.r1();
        r1 * r1 * self.base.deriv_bound()
    }

    fn couples_coordinates(&self) -> bool {
        self.base.couples_coordinates()
    }

    fn modulus(&self) -> Modulus {
        self.modulus
    }
}
