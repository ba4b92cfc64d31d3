use alloc::borrow::Cow;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{LinOp, SeqVec, Window};
use crate::{Error, Result};

/// Operators `A_k`, `k in [a, b-1]`, acting on the interval `I = [a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSeq {
    start: i64,
    ops: Vec<LinOp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    invs: Option<Vec<LinOp>>,
}

impl OperatorSeq {
    pub fn new(start: i64, ops: Vec<LinOp>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidInput("operator sequence needs at least one operator".into()));
        }
        for w in ops.windows(2) {
            if w[0].codomain() != w[1].domain() {
                return Err(Error::WindowMismatch { expected: w[0].codomain(), found: w[1].domain() });
            }
        }
        Ok(OperatorSeq { start, ops, invs: None })
    }

    /// Attaches explicit inverses (e.g. derivatives of the inverse map).
    pub fn with_inverses(mut self, invs: Vec<LinOp>) -> Result<Self> {
        if invs.len() != self.ops.len() {
            return Err(Error::InvalidInput("inverse count does not match operator count".into()));
        }
        for (a, b) in self.ops.iter().zip(&invs) {
            if a.domain() != b.codomain() || a.codomain() != b.domain() {
                return Err(Error::WindowMismatch { expected: a.domain(), found: b.codomain() });
            }
        }
        self.invs = Some(invs);
        Ok(self)
    }

    /// Computes and caches every inverse once.
    pub fn with_computed_inverses(self) -> Result<Self> {
        if self.invs.is_some() {
            return Ok(self);
        }
        let invs = self.ops.iter().map(LinOp::inverse).collect::<Result<Vec<_>>>()?;
        self.with_inverses(invs)
    }

    pub fn has_inverses(&self) -> bool {
        self.invs.is_some()
    }

    /// `(a, b)` with operators for `k in [a, b-1]`.
    pub fn interval(&self) -> (i64, i64) {
        (self.start, self.start + self.ops.len() as i64)
    }

    pub fn ops(&self) -> &[LinOp] {
        &self.ops
    }

    fn pos(&self, k: i64) -> Result<usize> {
        let (a, b) = self.interval();
        if k < a || k >= b {
            return Err(Error::InvalidInput(alloc::format!("operator index {k} outside [{a}, {}]", b - 1)));
        }
        Ok((k - a) as usize)
    }

    pub fn op(&self, k: i64) -> Result<&LinOp> {
        Ok(&self.ops[self.pos(k)?])
    }

    pub fn inv(&self, k: i64) -> Result<Cow<'_, LinOp>> {
        let i = self.pos(k)?;
        match &self.invs {
            Some(v) => Ok(Cow::Borrowed(&v[i])),
            None => Ok(Cow::Owned(self.ops[i].inverse()?)),
        }
    }

    /// Window of the space at index `k in [a, b]`.
    pub fn window_at(&self, k: i64) -> Result<Window> {
        let (a, b) = self.interval();
        if k == b {
            return Ok(self.ops[self.ops.len() - 1].codomain());
        }
        if k < a || k > b {
            return Err(Error::InvalidInput(alloc::format!("index {k} outside [{a}, {b}]")));
        }
        Ok(self.ops[(k - a) as usize].domain())
    }

    /// `Φ(k, l)`: `A_{k-1}...A_l` for `l < k`, identity for `l = k`, `A_k^{-1}...A_{l-1}^{-1}` for `l > k`.
    pub fn cocycle(&self, k: i64, l: i64) -> Result<LinOp> {
        let mut acc = LinOp::identity(self.window_at(l)?);
        self.window_at(k)?;
        if l < k {
            for j in l..k {
                acc = self.op(j)?.compose(&acc)?;
            }
        } else {
            for j in (k..l).rev() {
                acc = self.inv(j)?.compose(&acc)?;
            }
        }
        Ok(acc)
    }

    /// `Φ(k, l) v` without forming the product.
    pub fn cocycle_apply(&self, k: i64, l: i64, v: &SeqVec) -> Result<SeqVec> {
        v.check_window(self.window_at(l)?)?;
        self.window_at(k)?;
        let mut x = v.clone();
        if l < k {
            for j in l..k {
                x = self.op(j)?.apply(&x)?;
            }
        } else {
            for j in (k..l).rev() {
                x = self.inv(j)?.apply(&x)?;
            }
        }
        Ok(x)
    }

    /// Restriction to the sub-interval `[a2, b2]`.
    pub fn restrict(&self, a2: i64, b2: i64) -> Result<OperatorSeq> {
        let (a, b) = self.interval();
        if a2 < a || b2 > b || a2 >= b2 {
            return Err(Error::InvalidInput("sub-interval outside the sequence".into()));
        }
        let (i, j) = ((a2 - a) as usize, (b2 - a) as usize);
        Ok(OperatorSeq {
            start: a2,
            ops: self.ops[i..j].to_vec(),
            invs: self.invs.as_ref().map(|v| v[i..j].to_vec()),
        })
    }
}
