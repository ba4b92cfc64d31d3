use alloc::string::String;
use alloc::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Diffeo, Modulus};
use crate::seqcore::{LinOp, NormExp, SeqVec, Window};
use crate::{Error, Result};

/// Shape of the smooth perturbation `φ` in `g = f + δ φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbKind {
    /// `φ(x)_k = sin(x_k)`.
    Diagonal,
    /// `φ(x)_k = sin(x_{k+1})`: couples each coordinate to its upper neighbour.
    Ahead,
}

/// `g = f + δ φ` with `‖φ‖_{C¹} ≤ 1` (in `l^∞`; `‖Dφ‖ ≤ 1` in every `l^p`).
pub struct Perturbed {
    base: Arc<dyn Diffeo>,
    delta: f64,
    kind: PerturbKind,
}

impl Perturbed {
    pub fn new(base: Arc<dyn Diffeo>, delta: f64, kind: PerturbKind) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidInput("perturbation size must be finite and >= 0".into()));
        }
        Ok(Perturbed { base, delta, kind })
    }

    pub fn base(&self) -> &Arc<dyn Diffeo> {
        &self.base
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kind(&self) -> PerturbKind {
        self.kind
    }

    /// `g(x) - f(x)`.
    pub fn bump(&self, x: &SeqVec) -> SeqVec {
        let c = x.coeffs();
        let n = c.len();
        let d = self.delta;
        match self.kind {
            PerturbKind::Diagonal => x.map(|_, u| d * libm::sin(u)),
            PerturbKind::Ahead => {
                let w = x.window();
                x.map(|i, _| {
                    let j = (i - w.lo) as usize + 1;
                    if j < n {
                        d * libm::sin(c[j])
                    } else {
                        0.0
                    }
                })
            }
        }
    }

    fn dbump(&self, x: &SeqVec) -> Result<LinOp> {
        let w = x.window();
        let c = x.coeffs();
        match self.kind {
            PerturbKind::Diagonal => LinOp::diag(w, c.iter().map(|u| self.delta * libm::cos(*u)).collect()),
            PerturbKind::Ahead => LinOp::shift_diag(w, w, -1, c.iter().map(|u| self.delta * libm::cos(*u)).collect()),
        }
    }

    /// Inverse derivative at the point `x` (not at its image).
    fn dg_inverse_at(&self, x: &SeqVec) -> Result<LinOp> {
        let dfinv = self.base.dinverse(&self.base.forward(x)?)?;
        let k = dfinv.compose(&self.dbump(x)?)?;
        let id = LinOp::identity(x.window());
        id.add(&k)?.inverse()?.compose(&dfinv)
    }
}

impl Diffeo for Perturbed {
    fn name(&self) -> String {
        alloc::format!("{}+{:?}({})", self.base.name(), self.kind, self.delta)
    }

    fn window(&self) -> Window {
        self.base.window()
    }

    fn p(&self) -> NormExp {
        self.base.p()
    }

    fn forward(&self, x: &SeqVec) -> Result<SeqVec> {
        self.base.forward(x)?.add(&self.bump(x))
    }

    /// Chord iteration with the unperturbed inverse derivative; contracts at rate `~Rδ`.
    fn inverse(&self, y: &SeqVec) -> Result<SeqVec> {
        let mut x = self.base.inverse(y)?;
        if self.delta == 0.0 {
            return Ok(x);
        }
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let r = self.forward(&x)?.sub(y)?;
            let step = self.base.dinverse(&self.base.forward(&x)?)?.apply(&r)?;
            let s = step.norm();
            x = x.sub(&step)?;
            if s <= 1e-16 * (1.0 + x.norm()) || s >= last {
                return Ok(x);
            }
            last = s;
        }
        Err(Error::NoConvergence("perturbed inverse".into()))
    }

    fn dforward(&self, x: &SeqVec) -> Result<LinOp> {
        self.base.dforward(x)?.add(&self.dbump(x)?)
    }

    fn dinverse(&self, y: &SeqVec) -> Result<LinOp> {
        if self.delta == 0.0 {
            return self.base.dinverse(y);
        }
        self.dg_inverse_at(&self.inverse(y)?)
    }

    fn deriv_bound(&self) -> f64 {
        let r = self.base.deriv_bound();
        let rd = r * self.delta;
        if rd < 1.0 {
            (r + self.delta).max(r / (1.0 - rd))
        } else {
            f64::INFINITY
        }
    }

    fn couples_coordinates(&self) -> bool {
        self.kind == PerturbKind::Ahead || self.base.couples_coordinates()
    }

    fn modulus(&self) -> Modulus {
        if self.delta == 0.0 {
            self.base.modulus()
        } else {
            self.base.modulus().plus(Modulus::Linear(self.delta))
        }
    }
}
