use crate::seqcore::{LinOp, NormExp, SeqVec, Window};
use crate::systems::Diffeo;
use crate::Result;

/// A base map `α` with a linear operator over each point.
pub trait Cocycle: Sync {
    fn window(&self) -> Window;
    fn p(&self) -> NormExp;
    /// `α(x)`.
    fn step(&self, x: &SeqVec) -> Result<SeqVec>;
    /// `α^{-1}(x)`.
    fn step_back(&self, x: &SeqVec) -> Result<SeqVec>;
    /// `A(x)`, from the fiber at `x` to the fiber at `α(x)`.
    fn op(&self, x: &SeqVec) -> Result<LinOp>;
    /// `A(α^{-1}(x))^{-1}`, from the fiber at `x` to the fiber at `α^{-1}(x)`.
    fn op_back(&self, x: &SeqVec) -> Result<LinOp>;
    /// Whether orbits must be checked against the window edge.
    fn couples_coordinates(&self) -> bool {
        true
    }
}

/// `(f, Df)`.
pub struct DiffeoCocycle<'a>(pub &'a dyn Diffeo);

impl Cocycle for DiffeoCocycle<'_> {
    fn window(&self) -> Window {
        self.0.window()
    }
    fn p(&self) -> NormExp {
        self.0.p()
    }
    fn step(&self, x: &SeqVec) -> Result<SeqVec> {
        self.0.forward(x)
    }
    fn step_back(&self, x: &SeqVec) -> Result<SeqVec> {
        self.0.inverse(x)
    }
    fn op(&self, x: &SeqVec) -> Result<LinOp> {
        self.0.dforward(x)
    }
    fn op_back(&self, x: &SeqVec) -> Result<LinOp> {
        self.0.dinverse(x)
    }
    fn couples_coordinates(&self) -> bool {
        self.0.couples_coordinates()
    }
}

/// `(g, Df)`: derivative of one map carried along the orbits of another.
pub struct DerivAlong<'a> {
    pub base: &'a dyn Diffeo,
    pub deriv: &'a dyn Diffeo,
}

impl Cocycle for DerivAlong<'_> {
    fn window(&self) -> Window {
        self.base.window()
    }
    fn p(&self) -> NormExp {
        self.base.p()
    }
    fn step(&self, x: &SeqVec) -> Result<SeqVec> {
        self.base.forward(x)
    }
    fn step_back(&self, x: &SeqVec) -> Result<SeqVec> {
        self.base.inverse(x)
    }
    fn op(&self, x: &SeqVec) -> Result<LinOp> {
        self.deriv.dforward(x)
    }
    fn op_back(&self, x: &SeqVec) -> Result<LinOp> {
        let u = self.base.inverse(x)?;
        self.deriv.dinverse(&self.deriv.forward(&u)?)
    }
}

/// Point-independent operator over an arbitrary base map.
pub struct ConstantCocycle<'a> {
    pub base: &'a dyn Diffeo,
    pub a: LinOp,
    pub a_inv: LinOp,
}

impl<'a> ConstantCocycle<'a> {
    pub fn new(base: &'a dyn Diffeo, a: LinOp) -> Result<Self> {
        let a_inv = a.inverse()?;
        Ok(ConstantCocycle { base, a, a_inv })
    }
}

impl Cocycle for ConstantCocycle<'_> {
    fn window(&self) -> Window {
        self.base.window()
    }
    fn p(&self) -> NormExp {
        self.base.p()
    }
    fn step(&self, x: &SeqVec) -> Result<SeqVec> {
        self.base.forward(x)
    }
    fn step_back(&self, x: &SeqVec) -> Result<SeqVec> {
        self.base.inverse(x)
    }
    fn op(&self, _x: &SeqVec) -> Result<LinOp> {
        Ok(self.a.clone())
    }
    fn op_back(&self, _x: &SeqVec) -> Result<LinOp> {
        Ok(self.a_inv.clone())
    }
}
