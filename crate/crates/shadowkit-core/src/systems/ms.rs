use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{invert_increasing, Diffeo, Modulus};
use crate::seqcore::{LinOp, NormExp, SeqVec, Window};
use crate::{Error, Result};

/// Parameters of the Morse–Smale scalar map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsParams {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Second-derivative bound; the attained bound is used when absent.
    #[serde(default)]
    pub m: Option<f64>,
}

impl Default for MsParams {
    fn default() -> Self {
        MsParams { lambda1: 0.5, lambda2: 0.75, m: None }
    }
}

/// Odd C² scalar map with fixed points -1, 0, 1 and multipliers `λ1`, `1/λ1`, `λ1`.
///
/// `a'(x) = λ1 + (1/λ1 - λ1) φ(|x|)` where `φ` falls from 1 to 0 on `[0, t1]` along a
/// cubic smoothstep; `t1 = 2λ1/(1+λ1)` is the unique width that pins `a(1) = 1`.
/// Beyond `t1` the map is affine with slope `λ1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsMap {
    lambda1: f64,
    t1: f64,
    c: f64,
}

impl MsMap {
    pub fn new(lambda1: f64) -> Result<Self> {
        if !(lambda1 > 0.0 && lambda1 < 1.0) {
            return Err(Error::InvalidInput("lambda1 must lie in (0, 1)".into()));
        }
        Ok(MsMap { lambda1, t1: 2.0 * lambda1 / (1.0 + lambda1), c: 1.0 / lambda1 - lambda1 })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = libm::fabs(x);
        let v = if u >= self.t1 {
            1.0 + self.lambda1 * (u - 1.0)
        } else {
            let s = u / self.t1;
            let prim = u - self.t1 * (s * s * s - 0.5 * s * s * s * s);
            self.lambda1 * u + self.c * prim
        };
        if x < 0.0 {
            -v
        } else {
            v
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        let u = libm::fabs(x);
        if u >= self.t1 {
            return self.lambda1;
        }
        let s = u / self.t1;
        self.lambda1 + self.c * (1.0 - s * s * (3.0 - 2.0 * s))
    }

    pub fn d2(&self, x: f64) -> f64 {
        let u = libm::fabs(x);
        if u >= self.t1 {
            return 0.0;
        }
        let s = u / self.t1;
        let v = -self.c * 6.0 * s * (1.0 - s) / self.t1;
        if x < 0.0 {
            -v
        } else {
            v
        }
    }

    /// Attained `max |a''|`.
    pub fn d2_max(&self) -> f64 {
        1.5 * self.c / self.t1
    }

    pub fn inv(&self, y: f64) -> f64 {
        let u = libm::fabs(y);
        let edge = self.eval(self.t1);
        let v = if u >= edge {
            1.0 + (u - 1.0) / self.lambda1
        } else {
            invert_increasing(|x| self.eval(x), |x| self.d1(x), u, u * self.lambda1).clamp(0.0, self.t1)
        };
        if y < 0.0 {
            -v
        } else {
            v
        }
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
}

/// Coordinate-wise product `f({x_k}) = {a(x_k)}`.
#[derive(Debug, Clone)]
pub struct MsProduct {
    window: Window,
    p: NormExp,
    map: MsMap,
    params: MsParams,
    m: f64,
}

/// Checks the scalar map on a 10⁴-point grid and builds the product system.
pub fn make_ms_product(params: MsParams, window: Window, p: NormExp) -> Result<MsProduct> {
    let MsParams { lambda1, lambda2, m } = params;
    if !(lambda1 > 0.0 && lambda1 < lambda2 && lambda2 < 1.0) {
        return Err(Error::InvalidInput("need 0 < lambda1 < lambda2 < 1".into()));
    }
    let map = MsMap::new(lambda1)?;
    let attained = map.d2_max();
    let m = match m {
        Some(m) if m + 1e-12 < attained => {
            return Err(Error::InvalidInput(alloc::format!("M = {m} below the attained |a''| = {attained}")))
        }
        Some(m) => m,
        None => attained,
    };
    for i in 0..10_000 {
        let x = -3.0 + 6.0 * i as f64 / 9_999.0;
        let d = map.d1(x);
        if d < lambda1 - 1e-12 || d > 1.0 / lambda1 + 1e-12 {
            return Err(Error::DerivativeRange(alloc::format!("a'({x}) = {d} outside [lambda1, 1/lambda1]")));
        }
        if libm::fabs(map.d2(x)) > m + 1e-12 {
            return Err(Error::DerivativeRange(alloc::format!("|a''({x})| exceeds M")));
        }
    }
    for fp in [-1.0, 0.0, 1.0] {
        if libm::fabs(map.eval(fp) - fp) > 1e-15 {
            return Err(Error::InvalidInput("fixed point pinning failed".into()));
        }
    }
    Ok(MsProduct { window, p, map, params, m })
}

impl MsProduct {
    pub fn map(&self) -> &MsMap {
        &self.map
    }

    pub fn params(&self) -> MsParams {
        self.params
    }

    fn inv_coeffs(&self, y: &SeqVec) -> Vec<f64> {
        y.coeffs().iter().map(|v| self.map.inv(*v)).collect()
    }
}

impl Diffeo for MsProduct {
    fn name(&self) -> String {
        "ms_product".into()
    }

    fn window(&self) -> Window {
        self.window
    }

    fn p(&self) -> NormExp {
        self.p
    }

    fn forward(&self, x: &SeqVec) -> Result<SeqVec> {
        x.check_window(self.window)?;
        Ok(x.map(|_, v| self.map.eval(v)))
    }

    fn inverse(&self, y: &SeqVec) -> Result<SeqVec> {
        y.check_window(self.window)?;
        SeqVec::from_coeffs(self.window, self.inv_coeffs(y), y.p())
    }

    fn dforward(&self, x: &SeqVec) -> Result<LinOp> {
        x.check_window(self.window)?;
        LinOp::diag(self.window, x.coeffs().iter().map(|v| self.map.d1(*v)).collect())
    }

    fn dinverse(&self, y: &SeqVec) -> Result<LinOp> {
        y.check_window(self.window)?;
        LinOp::diag(self.window, self.inv_coeffs(y).iter().map(|v| 1.0 / self.map.d1(*v)).collect())
    }

    fn deriv_bound(&self) -> f64 {
        1.0 / self.params.lambda1
    }

    fn couples_coordinates(&self) -> bool {
        false
    }

    fn modulus(&self) -> Modulus {
        Modulus::Linear(self.m)
    }
}
