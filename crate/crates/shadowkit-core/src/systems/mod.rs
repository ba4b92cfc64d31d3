//! Diffeomorphisms on windows: the weighted shifts, the Morse–Smale product,
//! the non-dichotomic linear sequence, conjugation and C¹-small perturbations.

mod conj;
mod linear_ex;
mod ms;
mod perturb;
mod shift;

pub use conj::{conjugate, Conjugated, CoordSine};
pub use linear_ex::{make_linear_example_seq, no_ed_projection};
pub use ms::{make_ms_product, MsMap, MsParams, MsProduct};
pub use perturb::{PerturbKind, Perturbed};
pub use shift::{make_weighted_shift, ShiftBranch, WeightedShift};

use alloc::string::String;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::seqcore::{LinOp, NormExp, SeqVec, Window};
use crate::Result;

/// A diffeomorphism of a window together with its regularity data.
pub trait Diffeo: Send + Sync {
    fn name(&self) -> String;
    fn window(&self) -> Window;
    fn p(&self) -> NormExp;
    fn forward(&self, x: &SeqVec) -> Result<SeqVec>;
    fn inverse(&self, y: &SeqVec) -> Result<SeqVec>;
    /// `Df(x)`.
    fn dforward(&self, x: &SeqVec) -> Result<LinOp>;
    /// Derivative of the inverse map at `y`, i.e. `Df(f^{-1}(y))^{-1}`.
    fn dinverse(&self, y: &SeqVec) -> Result<LinOp>;
    /// Bound `R` on `‖Df‖` and `‖Df^{-1}‖`.
    fn deriv_bound(&self) -> f64;
    fn modulus(&self) -> Modulus;
    /// Whether the map moves mass between coordinates, so that the window edge is a truncation.
    fn couples_coordinates(&self) -> bool {
        true
    }
}

/// Truncation guard, skipped for systems acting coordinate by coordinate.
pub fn guard(sys: &dyn Diffeo, v: &SeqVec, step: i64) -> Result<()> {
    if sys.couples_coordinates() {
        crate::seqcore::truncation_guard(v, step)
    } else {
        Ok(())
    }
}

/// Exact orbit `α^{-before}(x), ..., α^{after}(x)`, guarded at every step.
pub fn orbit_segment(sys: &dyn Diffeo, x: &SeqVec, before: usize, after: usize) -> Result<alloc::vec::Vec<SeqVec>> {
    let mut back = alloc::vec::Vec::with_capacity(before);
    let mut cur = x.clone();
    for n in 1..=before {
        cur = sys.inverse(&cur)?;
        guard(sys, &cur, -(n as i64))?;
        back.push(cur.clone());
    }
    back.reverse();
    back.push(x.clone());
    let mut cur = x.clone();
    for n in 1..=after {
        cur = sys.forward(&cur)?;
        guard(sys, &cur, n as i64)?;
        back.push(cur.clone());
    }
    Ok(back)
}

/// Modulus of differentiability `r`, with `‖s_f(x, v)‖ ≤ ‖v‖ r(‖v‖)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "c", rename_all = "snake_case")]
pub enum Modulus {
    Zero,
    Linear(f64),
}

impl Modulus {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Modulus::Zero => 0.0,
            Modulus::Linear(c) => c * t,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Modulus::Zero) || matches!(self, Modulus::Linear(c) if *c == 0.0)
    }

    /// Sum of two moduli.
    pub fn plus(&self, other: Modulus) -> Modulus {
        match (*self, other) {
            (Modulus::Zero, m) | (m, Modulus::Zero) => m,
            (Modulus::Linear(a), Modulus::Linear(b)) => Modulus::Linear(a + b),
        }
    }

    /// Largest `t` with `r(t) ≤ y`, by bisection on the monotone `r` (infinite if unbounded).
    pub fn inverse(&self, y: f64) -> f64 {
        if self.eval(1e300) <= y {
            return f64::INFINITY;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while self.eval(hi) <= y {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) <= y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// `s_f(x, v) = f(x + v) - f(x) - Df(x) v`.
pub fn s_remainder(sys: &dyn Diffeo, x: &SeqVec, v: &SeqVec) -> Result<SeqVec> {
    let xv = x.add(v)?;
    let a = sys.forward(&xv)?;
    let b = sys.forward(x)?;
    let l = sys.dforward(x)?.apply(v)?;
    a.sub(&b)?.sub(&l)
}

/// Random point supported on `[-radius, radius]` with coordinates in `[-amp, amp]`.
pub fn random_point(window: Window, p: NormExp, radius: i64, amp: f64, rng: &mut ChaCha8Rng) -> SeqVec {
    SeqVec::from_fn(window, p, |i| if i.abs() <= radius { rng.gen_range(-amp..=amp) } else { 0.0 })
}

/// Empirical linear modulus: the largest `‖s_f‖/‖v‖²` over shells `‖v‖ = 10^{-j}`,
/// doubled for headroom. Used for systems without a closed-form modulus.
pub fn fit_modulus(sys: &dyn Diffeo, seed: u64, samples: usize) -> Result<Modulus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = sys.window();
    let radius = (w.len() as i64 / 8).clamp(1, 8);
    let mut c = 0.0f64;
    for _ in 0..samples {
        let x = random_point(w, sys.p(), radius, 2.0, &mut rng);
        let dir = random_point(w, sys.p(), radius, 1.0, &mut rng);
        let n = dir.norm();
        if n == 0.0 {
            continue;
        }
        for j in 0..5 {
            let t = libm::pow(10.0, -(j as f64));
            let v = dir.scale(t / n);
            let s = s_remainder(sys, &x, &v)?;
            c = c.max(s.norm() / (t * t));
        }
    }
    Ok(if c == 0.0 { Modulus::Zero } else { Modulus::Linear(2.0 * c) })
}

/// Newton iteration with a bisection safeguard for an increasing scalar map.
pub(crate) fn invert_increasing(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, y: f64, guess: f64) -> f64 {
    // bracket
    let mut step = 1.0f64.max(libm::fabs(guess));
    let (mut lo, mut hi) = (guess - step, guess + step);
    while f(lo) > y {
        step *= 2.0;
        lo = guess - step;
    }
    step = 1.0f64.max(libm::fabs(guess));
    while f(hi) < y {
        step *= 2.0;
        hi = guess + step;
    }
    let mut x = guess.clamp(lo, hi);
    for _ in 0..200 {
        let r = f(x) - y;
        if r == 0.0 {
            return x;
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = df(x);
        let mut nx = x - r / d;
        if !(nx > lo && nx < hi) {
            nx = 0.5 * (lo + hi);
        }
        if libm::fabs(nx - x) <= 1e-17 * (1.0 + libm::fabs(x)) || hi - lo <= 1e-16 * (1.0 + libm::fabs(x)) {
            return nx;
        }
        x = nx;
    }
    x
}
