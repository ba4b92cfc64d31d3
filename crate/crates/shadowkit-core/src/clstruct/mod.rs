//! Complementary projections, splittings, certificates and their verifiers.

mod builders;
mod cocycle;
mod split;
mod verify;

pub use builders::{
    diagonal_certificate, hyperbolic_diag_certificate, ms_certificate, no_ed_certificate, shift_certificate,
    swapped_certificate, transported_certificate, MsCertInfo,
};
pub use cocycle::{Cocycle, ConstantCocycle, DerivAlong, DiffeoCocycle};
pub use split::{
    CoordMagnitude, IndexFamily, IndexThreshold, NoEdSplitting, OrbitSplitting, Splitting, Swapped, Transported,
    Uniform,
};
pub use verify::{
    unit_growth, verify_cl_diffeo, verify_cl_opseq, verify_cocycle_cl, verify_dichotomy, Side, VerificationReport,
    VerifyOptions, Witness,
};

use alloc::string::String;
use alloc::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::seqcore::{LinOp, NormExp, Window};
use crate::{Error, Result};

/// Complementary projections `(P, Q)`: `P` onto the stable part, `Q = I - P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjPair {
    pub p: LinOp,
    pub q: LinOp,
}

/// Algebraic defects of a pair, as max-abs entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDefects {
    pub complement: f64,
    pub idempotence_p: f64,
    pub idempotence_q: f64,
}

impl PairDefects {
    pub fn max(&self) -> f64 {
        self.complement.max(self.idempotence_p).max(self.idempotence_q)
    }
}

impl ProjPair {
    /// Pair with `Q = I - P`.
    pub fn from_p(p: LinOp) -> Result<Self> {
        if p.domain() != p.codomain() {
            return Err(Error::WindowMismatch { expected: p.domain(), found: p.codomain() });
        }
        let q = LinOp::identity(p.domain()).sub(&p)?;
        Ok(ProjPair { p, q })
    }

    pub fn new(p: LinOp, q: LinOp) -> Result<Self> {
        if p.domain() != q.domain() || p.codomain() != q.codomain() || p.domain() != p.codomain() {
            return Err(Error::WindowMismatch { expected: p.domain(), found: q.domain() });
        }
        Ok(ProjPair { p, q })
    }

    /// Projection onto coordinates where `stable` holds.
    pub fn coordinates(w: Window, stable: impl FnMut(i64) -> bool) -> Self {
        let p = LinOp::coordinate_projection(w, stable);
        let q = LinOp::identity(w).sub(&p).expect("same window");
        ProjPair { p, q }
    }

    pub fn swapped(&self) -> Self {
        ProjPair { p: self.q.clone(), q: self.p.clone() }
    }

    pub fn window(&self) -> Window {
        self.p.domain()
    }

    pub fn defects(&self) -> Result<PairDefects> {
        let id = LinOp::identity(self.window());
        Ok(PairDefects {
            complement: self.p.add(&self.q)?.max_abs_diff(&id)?,
            idempotence_p: self.p.compose(&self.p)?.max_abs_diff(&self.p)?,
            idempotence_q: self.q.compose(&self.q)?.max_abs_diff(&self.q)?,
        })
    }

    pub fn max_norm(&self, p: NormExp) -> f64 {
        self.p.op_norm(p).max(self.q.op_norm(p))
    }
}

/// Constants `(C, λ, R)` and the projection supplier of a generalized hyperbolic structure.
#[derive(Clone)]
pub struct CLCertificate {
    pub c: f64,
    pub lambda: f64,
    pub r: f64,
    pub split: Arc<dyn Splitting>,
}

/// Serializable view of a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertSummary {
    pub c: f64,
    pub lambda: f64,
    pub r: f64,
    pub splitting: String,
}

impl CLCertificate {
    pub fn new(c: f64, lambda: f64, r: f64, split: Arc<dyn Splitting>) -> Result<Self> {
        if !(c >= 1.0) || !(lambda > 0.0 && lambda < 1.0) || !(r > 0.0) {
            return Err(Error::InvalidInput(alloc::format!("bad constants C={c}, lambda={lambda}, R={r}")));
        }
        Ok(CLCertificate { c, lambda, r, split })
    }

    /// Same splitting, other constants.
    pub fn with_constants(&self, c: f64, lambda: f64) -> Result<Self> {
        CLCertificate::new(c, lambda, self.r, self.split.clone())
    }

    /// `L = C²(1+λ)/(1-λ)`.
    pub fn l_const(&self) -> f64 {
        self.c * self.c * (1.0 + self.lambda) / (1.0 - self.lambda)
    }

    pub fn summary(&self) -> CertSummary {
        CertSummary { c: self.c, lambda: self.lambda, r: self.r, splitting: self.split.describe() }
    }

    /// Projections at indices `a..=b`.
    pub fn index_pairs(&self, a: i64, b: i64) -> Result<alloc::vec::Vec<ProjPair>> {
        (a..=b)
            .map(|k| {
                self.split
                    .at_index(k)
                    .ok_or_else(|| Error::Certificate(alloc::format!("no projection at index {k}")))
            })
            .collect()
    }
}

impl core::fmt::Debug for CLCertificate {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("CLCertificate")
            .field("c", &self.c)
            .field("lambda", &self.lambda)
            .field("r", &self.r)
            .field("split", &self.split.describe())
            .finish()
    }
}

#[cfg(test)]
mod tests;
