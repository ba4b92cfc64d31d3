use serde::{Deserialize, Serialize};

use crate::clstruct::CLCertificate;
use crate::seqcore::ext_f64;
use crate::systems::{Diffeo, Modulus};
use crate::{Error, Result};

/// `L`, `M = 2L` and the admissible noise levels for a system and certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowConstants {
    pub c: f64,
    pub lambda: f64,
    /// Derivative bound of the system.
    pub r: f64,
    pub l: f64,
    pub m: f64,
    /// Largest `d` for the finite-window induction.
    #[serde(with = "ext_f64")]
    pub d0: f64,
    /// Largest `d` for which every refinement halves the step error.
    #[serde(with = "ext_f64")]
    pub d0_inf: f64,
}

impl ShadowConstants {
    /// `RM + R + L`.
    fn k(&self) -> f64 {
        self.r * self.m + self.r + self.l
    }

    /// `L + 2(RM+R)(RM+R+L) r((RM+R+L)d) ≤ M`.
    pub fn cond_m2a(&self, modulus: Modulus, d: f64) -> bool {
        let k = self.k();
        self.l + 2.0 * (self.r * self.m + self.r) * k * modulus.eval(k * d) <= self.m
    }

    /// `2(RM+R+L) r((RM+R+L)d) < 1`.
    pub fn cond_m2b(&self, modulus: Modulus, d: f64) -> bool {
        let k = self.k();
        2.0 * k * modulus.eval(k * d) < 1.0
    }

    /// `M r(Md) < 1/2`.
    pub fn cond_half(&self, modulus: Modulus, d: f64) -> bool {
        self.m * modulus.eval(self.m * d) < 0.5
    }
}

/// Supremum of `d` where a monotone condition holds, by doubling then bisection.
fn largest(ok: impl Fn(f64) -> bool) -> Result<f64> {
    if !ok(1e-300) {
        return Err(Error::Precondition("modulus does not vanish at zero: no admissible d0".into()));
    }
    let mut hi = 1.0f64;
    while ok(hi) {
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = 0.0f64;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

pub fn shadowing_constants(sys: &dyn Diffeo, cert: &CLCertificate) -> Result<ShadowConstants> {
    let l = cert.l_const();
    let mut sc = ShadowConstants {
        c: cert.c,
        lambda: cert.lambda,
        r: sys.deriv_bound(),
        l,
        m: 2.0 * l,
        d0: f64::INFINITY,
        d0_inf: f64::INFINITY,
    };
    let modulus = sys.modulus();
    if modulus.is_zero() {
        return Ok(sc);
    }
    sc.d0 = largest(|d| sc.cond_m2a(modulus, d) && sc.cond_m2b(modulus, d))?;
    sc.d0_inf = largest(|d| sc.cond_m2a(modulus, d) && sc.cond_m2b(modulus, d) && sc.cond_half(modulus, d))?;
    Ok(sc)
}
