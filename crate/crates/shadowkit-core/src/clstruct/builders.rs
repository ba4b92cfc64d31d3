use alloc::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{CLCertificate, IndexThreshold, NoEdSplitting, ProjPair, Swapped, Transported, Uniform};
use crate::seqcore::{LinOp, Window};
use crate::systems::{Diffeo, MsProduct, WeightedShift};
use crate::Result;

/// Shift certificate with stable part `{v_k = 0 for k < n}`.
///
/// Moving the split by `n` costs `(R/λ)^{|n|}` in the constant.
pub fn shift_certificate(sys: &WeightedShift, threshold: i64) -> Result<CLCertificate> {
    let (lambda, r) = (sys.lambda(), sys.deriv_bound());
    let c = libm::pow(r / lambda, threshold.unsigned_abs() as f64);
    CLCertificate::new(c, lambda, r, Arc::new(IndexThreshold::new(sys.window(), threshold)))
}

/// Same constants with `P` and `Q` exchanged; meant to fail.
pub fn swapped_certificate(cert: &CLCertificate) -> CLCertificate {
    CLCertificate { split: Arc::new(Swapped(cert.split.clone())), ..cert.clone() }
}

/// `P_k` onto coordinates `m ≤ k` with `C = 1`, `λ = 1/2`.
pub fn no_ed_certificate(window: Window) -> Result<CLCertificate> {
    CLCertificate::new(1.0, 0.5, 2.0, Arc::new(NoEdSplitting { window }))
}

/// `P = Diag(stable)` for a constant diagonal operator; contraction rates read off the entries.
pub fn diagonal_certificate(window: Window, stable: impl FnMut(i64) -> bool, lambda: f64, r: f64) -> Result<CLCertificate> {
    CLCertificate::new(1.0, lambda, r, Arc::new(Uniform(ProjPair::coordinates(window, stable))))
}

/// Pushes a certificate through a conjugacy with derivative bound `r1`: constants `(λ, R₁²C)`.
pub fn transported_certificate(cert: &CLCertificate, h: Arc<dyn Diffeo>, r1: f64, r: f64) -> Result<CLCertificate> {
    CLCertificate::new(r1 * r1 * cert.c, cert.lambda, r, Arc::new(Transported { base: cert.split.clone(), h }))
}

/// How the product certificate constant was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsCertInfo {
    /// Most steps any scanned orbit spends with a one-step factor above `λ2`.
    pub n0: usize,
    /// `(1/λ1)^{n0}`.
    pub c_bound: f64,
    /// Largest measured `|(a^n)'| / λ2^n` over the scan.
    pub c_empirical: f64,
    pub c: f64,
}

/// Certificate for the product map: `P_x` keeps coordinates with `|x_k| > 1/2`, `λ = λ2`.
///
/// The scalar map is scanned on a grid of `(0, 3]`; oddness covers the negative half.
/// Forward products are taken for stable starts and backward ones for unstable starts.
pub fn ms_certificate(sys: &MsProduct, horizon: usize) -> Result<(CLCertificate, MsCertInfo)> {
    let a = sys.map();
    let params = sys.params();
    let (l1, l2) = (params.lambda1, params.lambda2);
    let mut n0 = 0usize;
    let mut c_emp = 0.0f64;
    for i in 1..=3000 {
        let x0 = i as f64 / 1000.0;
        let stable = x0 > 0.5;
        let (mut x, mut prod, mut slow) = (x0, 1.0f64, 0usize);
        for n in 1..=horizon {
            let factor = if stable {
                let d = a.d1(x);
                x = a.eval(x);
                d
            } else {
                x = a.inv(x);
                1.0 / a.d1(x)
            };
            if factor > l2 {
                slow += 1;
            }
            prod *= factor;
            c_emp = c_emp.max(prod / libm::pow(l2, n as f64));
        }
        n0 = n0.max(slow);
    }
    let c_bound = libm::pow(1.0 / l1, n0 as f64);
    let c = c_bound.max(c_emp * (1.0 + 1e-6)).max(1.0);
    let split = super::CoordMagnitude { window: sys.window(), cut: 0.5 };
    let cert = CLCertificate::new(c, l2, sys.deriv_bound(), Arc::new(split))?;
    Ok((cert, MsCertInfo { n0, c_bound, c_empirical: c_emp, c }))
}

/// Constant operator with `P` on the coordinates where it has modulus below one.
pub fn hyperbolic_diag_certificate(op: &LinOp) -> Result<CLCertificate> {
    let w = op.domain();
    let s: alloc::vec::Vec<f64> = w.indices().map(|i| op.entry(i, i)).collect();
    let mut lambda = 0.0f64;
    let mut r = 0.0f64;
    for x in &s {
        let ax = libm::fabs(*x);
        lambda = lambda.max(if ax < 1.0 { ax } else { 1.0 / ax });
        r = r.max(ax.max(1.0 / ax));
    }
    if lambda >= 1.0 {
        return Err(crate::Error::Precondition("operator has an entry of modulus one".into()));
    }
    diagonal_certificate(w, |i| libm::fabs(s[w.pos(i).unwrap_or(0)]) < 1.0, lambda, r)
}
