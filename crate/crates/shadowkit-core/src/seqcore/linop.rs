use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{NormExp, SeqVec, Window};
use crate::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Storage of a [`LinOp`].
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    /// Matrix with `codomain.len()` rows and `domain.len()` columns.
    Dense(Mat),
    /// Per-index scalars; domain and codomain coincide.
    Diag(Vec<f64>),
    /// `e_j -> scalars[j] e_{j+shift}`; scalars are indexed by domain position.
    /// Entries whose target falls outside the codomain are dropped and stored as zero.
    ShiftDiag { shift: i64, scalars: Vec<f64> },
}

/// A linear map between two windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOp", into = "RawOp")]
pub struct LinOp {
    kind: OpKind,
    domain: Window,
    codomain: Window,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
enum RawOp {
    Dense { domain: Window, codomain: Window, rows: Vec<Vec<f64>> },
    Diag { window: Window, scalars: Vec<f64> },
    ShiftDiag { domain: Window, codomain: Window, shift: i64, scalars: Vec<f64> },
}

impl TryFrom<RawOp> for LinOp {
    type Error = Error;
    fn try_from(r: RawOp) -> Result<Self> {
        match r {
            RawOp::Dense { domain, codomain, rows } => {
                if rows.len() != codomain.len() || rows.iter().any(|r| r.len() != domain.len()) {
                    return Err(Error::InvalidInput("dense operator shape does not match windows".into()));
                }
                let m = Mat::from_fn(codomain.len(), domain.len(), |i, j| rows[i][j]);
                LinOp::dense(domain, codomain, m)
            }
            RawOp::Diag { window, scalars } => LinOp::diag(window, scalars),
            RawOp::ShiftDiag { domain, codomain, shift, scalars } => {
                LinOp::shift_diag(domain, codomain, shift, scalars)
            }
        }
    }
}

impl From<LinOp> for RawOp {
    fn from(a: LinOp) -> Self {
        match a.kind {
            OpKind::Dense(m) => RawOp::Dense {
                domain: a.domain,
                codomain: a.codomain,
                rows: (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect(),
            },
            OpKind::Diag(s) => RawOp::Diag { window: a.domain, scalars: s },
            OpKind::ShiftDiag { shift, scalars } => {
                RawOp::ShiftDiag { domain: a.domain, codomain: a.codomain, shift, scalars }
            }
        }
    }
}

fn finite(xs: &[f64]) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite operator entry".into()));
    }
    Ok(())
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(libm::fabs(*x)))
}

impl LinOp {
    pub fn identity(w: Window) -> Self {
        LinOp { kind: OpKind::Diag(vec![1.0; w.len()]), domain: w, codomain: w }
    }

    pub fn scalar(w: Window, c: f64) -> Self {
        LinOp { kind: OpKind::Diag(vec![c; w.len()]), domain: w, codomain: w }
    }

    pub fn zero(domain: Window, codomain: Window) -> Self {
        if domain == codomain {
            return Self::scalar(domain, 0.0);
        }
        LinOp { kind: OpKind::ShiftDiag { shift: 0, scalars: vec![0.0; domain.len()] }, domain, codomain }
    }

    pub fn diag(w: Window, scalars: Vec<f64>) -> Result<Self> {
        if scalars.len() != w.len() {
            return Err(Error::InvalidInput("diagonal length does not match window".into()));
        }
        finite(&scalars)?;
        Ok(LinOp { kind: OpKind::Diag(scalars), domain: w, codomain: w })
    }

    pub fn diag_fn(w: Window, f: impl FnMut(i64) -> f64) -> Result<Self> {
        Self::diag(w, w.indices().map(f).collect())
    }

    /// Diagonal 0/1 projection onto the coordinates selected by `keep`.
    pub fn coordinate_projection(w: Window, mut keep: impl FnMut(i64) -> bool) -> Self {
        let s = w.indices().map(|i| if keep(i) { 1.0 } else { 0.0 }).collect();
        LinOp { kind: OpKind::Diag(s), domain: w, codomain: w }
    }

    pub fn shift_diag(domain: Window, codomain: Window, shift: i64, mut scalars: Vec<f64>) -> Result<Self> {
        if scalars.len() != domain.len() {
            return Err(Error::InvalidInput("shift scalars length does not match domain".into()));
        }
        finite(&scalars)?;
        for (j, s) in scalars.iter_mut().enumerate() {
            if !codomain.contains(domain.index(j) + shift) {
                *s = 0.0;
            }
        }
        if shift == 0 && domain == codomain {
            return Ok(LinOp { kind: OpKind::Diag(scalars), domain, codomain });
        }
        Ok(LinOp { kind: OpKind::ShiftDiag { shift, scalars }, domain, codomain })
    }

    pub fn dense(domain: Window, codomain: Window, m: Mat) -> Result<Self> {
        if m.nrows() != codomain.len() || m.ncols() != domain.len() {
            return Err(Error::InvalidInput("dense operator shape does not match windows".into()));
        }
        finite(m.as_slice())?;
        Ok(LinOp { kind: OpKind::Dense(m), domain, codomain })
    }

    pub fn kind(&self) -> &OpKind {
        &self.kind
    }

    pub fn domain(&self) -> Window {
        self.domain
    }

    pub fn codomain(&self) -> Window {
        self.codomain
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.kind, OpKind::Dense(_))
    }

    /// True when every stored entry is exactly zero.
    pub fn is_zero(&self) -> bool {
        match &self.kind {
            OpKind::Dense(m) => m.iter().all(|x| *x == 0.0),
            OpKind::Diag(s) | OpKind::ShiftDiag { scalars: s, .. } => s.iter().all(|x| *x == 0.0),
        }
    }

    /// Applies to raw coefficients on the domain.
    pub fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            OpKind::Diag(s) => s.iter().zip(x).map(|(a, b)| a * b).collect(),
            OpKind::ShiftDiag { shift, scalars } => {
                let mut y = vec![0.0; self.codomain.len()];
                for (j, (a, b)) in scalars.iter().zip(x).enumerate() {
                    if let Some(t) = self.codomain.pos(self.domain.index(j) + shift) {
                        y[t] = a * b;
                    }
                }
                y
            }
            OpKind::Dense(m) => {
                let mut y = vec![0.0; m.nrows()];
                for (j, xj) in x.iter().enumerate() {
                    if *xj == 0.0 {
                        continue;
                    }
                    for (yi, mij) in y.iter_mut().zip(m.column(j).iter()) {
                        *yi += mij * xj;
                    }
                }
                y
            }
        }
    }

    pub fn apply(&self, v: &SeqVec) -> Result<SeqVec> {
        v.check_window(self.domain)?;
        Ok(SeqVec::raw(self.codomain, self.apply_slice(v.coeffs()), v.p()))
    }

    /// Applies column-wise to a block of vectors (rows indexed by the domain).
    pub fn apply_mat(&self, m: &Mat) -> Mat {
        match &self.kind {
            OpKind::Dense(a) => a * m,
            OpKind::Diag(s) => {
                let mut r = m.clone();
                for (i, si) in s.iter().enumerate() {
                    r.row_mut(i).scale_mut(*si);
                }
                r
            }
            OpKind::ShiftDiag { shift, scalars } => {
                let mut r = Mat::zeros(self.codomain.len(), m.ncols());
                for (i, si) in scalars.iter().enumerate() {
                    if let Some(t) = self.codomain.pos(self.domain.index(i) + shift) {
                        let row = m.row(i) * *si;
                        r.row_mut(t).copy_from(&row);
                    }
                }
                r
            }
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &LinOp) -> Result<LinOp> {
        if inner.codomain != self.domain {
            return Err(Error::WindowMismatch { expected: self.domain, found: inner.codomain });
        }
        let (dom, cod, mid) = (inner.domain, self.codomain, self.domain);
        let kind = match (&self.kind, &inner.kind) {
            (OpKind::Diag(a), OpKind::Diag(b)) => OpKind::Diag(a.iter().zip(b).map(|(x, y)| x * y).collect()),
            (OpKind::Diag(a), OpKind::ShiftDiag { shift, scalars }) => {
                let s = scalars
                    .iter()
                    .enumerate()
                    .map(|(j, b)| mid.pos(dom.index(j) + shift).map_or(0.0, |t| a[t] * b))
                    .collect();
                return LinOp::shift_diag(dom, cod, *shift, s);
            }
            (OpKind::ShiftDiag { shift, scalars }, OpKind::Diag(b)) => {
                let s = scalars.iter().zip(b).map(|(a, b)| a * b).collect();
                return LinOp::shift_diag(dom, cod, *shift, s);
            }
            (OpKind::ShiftDiag { shift: s1, scalars: a }, OpKind::ShiftDiag { shift: s2, scalars: b }) => {
                let s = b
                    .iter()
                    .enumerate()
                    .map(|(j, bj)| mid.pos(dom.index(j) + s2).map_or(0.0, |t| a[t] * bj))
                    .collect();
                return LinOp::shift_diag(dom, cod, s1 + s2, s);
            }
            (OpKind::Dense(m), OpKind::Diag(b)) => {
                let mut r = m.clone();
                for (j, bj) in b.iter().enumerate() {
                    r.column_mut(j).scale_mut(*bj);
                }
                OpKind::Dense(r)
            }
            (OpKind::Diag(a), OpKind::Dense(m)) => {
                let mut r = m.clone();
                for (i, ai) in a.iter().enumerate() {
                    r.row_mut(i).scale_mut(*ai);
                }
                OpKind::Dense(r)
            }
            (OpKind::Dense(m), OpKind::ShiftDiag { shift, scalars }) => {
                let mut r = Mat::zeros(cod.len(), dom.len());
                for (j, bj) in scalars.iter().enumerate() {
                    if let Some(t) = mid.pos(dom.index(j) + shift) {
                        r.column_mut(j).axpy(*bj, &m.column(t), 0.0);
                    }
                }
                OpKind::Dense(r)
            }
            (OpKind::ShiftDiag { shift, scalars }, OpKind::Dense(m)) => {
                let mut r = Mat::zeros(cod.len(), dom.len());
                for (i, ai) in scalars.iter().enumerate() {
                    if let Some(t) = cod.pos(mid.index(i) + shift) {
                        let row = m.row(i) * *ai;
                        r.row_mut(t).copy_from(&row);
                    }
                }
                OpKind::Dense(r)
            }
            (OpKind::Dense(a), OpKind::Dense(b)) => OpKind::Dense(a * b),
        };
        Ok(LinOp { kind, domain: dom, codomain: cod })
    }

    fn check_same_shape(&self, other: &LinOp) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::WindowMismatch { expected: self.domain, found: other.domain });
        }
        if self.codomain != other.codomain {
            return Err(Error::WindowMismatch { expected: self.codomain, found: other.codomain });
        }
        Ok(())
    }

    /// `self + c * other`, keeping structure where possible.
    pub fn add_scaled(&self, c: f64, other: &LinOp) -> Result<LinOp> {
        self.check_same_shape(other)?;
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(other.scale(c));
        }
        let (dom, cod) = (self.domain, self.codomain);
        let kind = match (&self.kind, &other.kind) {
            (OpKind::Diag(a), OpKind::Diag(b)) => OpKind::Diag(a.iter().zip(b).map(|(x, y)| x + c * y).collect()),
            (OpKind::ShiftDiag { shift: s1, scalars: a }, OpKind::ShiftDiag { shift: s2, scalars: b }) if s1 == s2 => {
                OpKind::ShiftDiag { shift: *s1, scalars: a.iter().zip(b).map(|(x, y)| x + c * y).collect() }
            }
            _ => OpKind::Dense(self.to_dense() + other.to_dense() * c),
        };
        Ok(LinOp { kind, domain: dom, codomain: cod })
    }

    pub fn add(&self, other: &LinOp) -> Result<LinOp> {
        self.add_scaled(1.0, other)
    }

    pub fn sub(&self, other: &LinOp) -> Result<LinOp> {
        self.add_scaled(-1.0, other)
    }

    pub fn scale(&self, c: f64) -> LinOp {
        let kind = match &self.kind {
            OpKind::Dense(m) => OpKind::Dense(m * c),
            OpKind::Diag(s) => OpKind::Diag(s.iter().map(|x| c * x).collect()),
            OpKind::ShiftDiag { shift, scalars } => {
                OpKind::ShiftDiag { shift: *shift, scalars: scalars.iter().map(|x| c * x).collect() }
            }
        };
        LinOp { kind, domain: self.domain, codomain: self.codomain }
    }

    /// Truncation-consistent inverse.
    ///
    /// For a `ShiftDiag` this is the opposite shift with reciprocal scalars; it inverts
    /// exactly on vectors carrying no mass on the indices the shift drops.
    pub fn inverse(&self) -> Result<LinOp> {
        match &self.kind {
            OpKind::Diag(s) => {
                if s.iter().any(|x| *x == 0.0) {
                    return Err(Error::NotInvertible("zero diagonal entry".into()));
                }
                Ok(LinOp { kind: OpKind::Diag(s.iter().map(|x| 1.0 / x).collect()), ..self.clone() })
            }
            OpKind::ShiftDiag { shift, scalars } => {
                let (dom, cod) = (self.domain, self.codomain);
                let mut inv = vec![0.0; cod.len()];
                for (j, a) in scalars.iter().enumerate() {
                    if let Some(t) = cod.pos(dom.index(j) + shift) {
                        if *a == 0.0 {
                            return Err(Error::NotInvertible("zero shift scalar".into()));
                        }
                        inv[t] = 1.0 / a;
                    }
                }
                LinOp::shift_diag(cod, dom, -shift, inv)
            }
            OpKind::Dense(m) => {
                if m.nrows() != m.ncols() {
                    return Err(Error::NotInvertible("non-square dense operator".into()));
                }
                let inv = m
                    .clone()
                    .lu()
                    .try_inverse()
                    .ok_or_else(|| Error::NotInvertible("singular dense operator".into()))?;
                if inv.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NotInvertible("ill-conditioned dense operator".into()));
                }
                Ok(LinOp { kind: OpKind::Dense(inv), domain: self.codomain, codomain: self.domain })
            }
        }
    }

    pub fn to_dense(&self) -> Mat {
        match &self.kind {
            OpKind::Dense(m) => m.clone(),
            OpKind::Diag(s) => Mat::from_diagonal(&DVector::from_column_slice(s)),
            OpKind::ShiftDiag { shift, scalars } => {
                let mut m = Mat::zeros(self.codomain.len(), self.domain.len());
                for (j, a) in scalars.iter().enumerate() {
                    if let Some(t) = self.codomain.pos(self.domain.index(j) + shift) {
                        m[(t, j)] = *a;
                    }
                }
                m
            }
        }
    }

    /// Matrix entry for codomain index `i` and domain index `j`.
    pub fn entry(&self, i: i64, j: i64) -> f64 {
        let (Some(r), Some(c)) = (self.codomain.pos(i), self.domain.pos(j)) else {
            return 0.0;
        };
        match &self.kind {
            OpKind::Dense(m) => m[(r, c)],
            OpKind::Diag(s) => {
                if r == c {
                    s[c]
                } else {
                    0.0
                }
            }
            OpKind::ShiftDiag { shift, scalars } => {
                if i == j + shift {
                    scalars[c]
                } else {
                    0.0
                }
            }
        }
    }

    /// Largest entrywise difference.
    pub fn max_abs_diff(&self, other: &LinOp) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(match (&self.kind, &other.kind) {
            (OpKind::Diag(a), OpKind::Diag(b)) => max_abs(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>()),
            _ => max_abs((self.to_dense() - other.to_dense()).as_slice()),
        })
    }

    /// Operator norm induced by `l^p`.
    ///
    /// Exact for structured kinds and for dense `p = 1, inf`; for dense `p = 2` the top
    /// singular value (SVD when small, power iteration otherwise). Other dense exponents
    /// use the Riesz–Thorin interpolation bound, which is an upper bound.
    pub fn op_norm(&self, p: NormExp) -> f64 {
        match &self.kind {
            OpKind::Diag(s) | OpKind::ShiftDiag { scalars: s, .. } => max_abs(s),
            OpKind::Dense(m) => dense_norm(m, p),
        }
    }
}

fn col_sum_norm(m: &Mat) -> f64 {
    m.column_iter().map(|c| c.iter().map(|x| libm::fabs(*x)).sum::<f64>()).fold(0.0, f64::max)
}

fn row_sum_norm(m: &Mat) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| libm::fabs(*x)).sum::<f64>()).fold(0.0, f64::max)
}

const SVD_CAP: usize = 160_000;

pub(crate) fn dense_norm(m: &Mat, p: NormExp) -> f64 {
    if m.iter().all(|x| *x == 0.0) {
        return 0.0;
    }
    match p {
        NormExp::One => col_sum_norm(m),
        NormExp::Inf => row_sum_norm(m),
        NormExp::Two => {
            let rt = libm::sqrt(col_sum_norm(m) * row_sum_norm(m));
            if m.nrows() * m.ncols() <= SVD_CAP {
                let s = m.clone().svd(false, false).singular_values.max();
                (s * (1.0 + 1e-12)).min(rt)
            } else {
                (power_norm(m) * (1.0 + 1e-6)).min(rt)
            }
        }
        NormExp::P(q) => {
            let t = 1.0 / q;
            libm::pow(col_sum_norm(m), t) * libm::pow(row_sum_norm(m), 1.0 - t)
        }
    }
}

fn power_norm(m: &Mat) -> f64 {
    let n = m.ncols();
    let mut x = DVector::from_fn(n, |j, _| 1.0 + 0.5 * libm::sin(1.0 + 1.7 * j as f64));
    x /= x.norm();
    let mut est = 0.0;
    for _ in 0..2000 {
        let y = m * &x;
        let e = y.norm();
        let z = m.transpose() * y;
        let zn = z.norm();
        if zn == 0.0 {
            break;
        }
        x = z / zn;
        if libm::fabs(e - est) <= 1e-15 * e {
            est = e;
            break;
        }
        est = e;
    }
    est
}
