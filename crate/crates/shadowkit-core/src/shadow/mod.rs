//! Pseudotrajectories and their refinement to exact orbits.

mod constants;

pub use constants::{shadowing_constants, ShadowConstants};

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundedsol::{
    neumann_solve_with, perron_solve_with, periodic_green_solve_with, InhomProblem, PeriodicProblem,
};
use crate::clstruct::{CLCertificate, ProjPair};
use crate::seqcore::{LinOp, OperatorSeq, SeqVec, Window};
use crate::systems::{guard, Diffeo};
use crate::{Error, Result};

/// Finite or periodic sequence of points with its step errors.
///
/// A periodic one stores one period; the step from the last point wraps to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pseudotrajectory {
    pub points: Vec<SeqVec>,
    pub periodic: bool,
    pub step_errors: Vec<f64>,
    /// Largest step error.
    pub d: f64,
}

impl Pseudotrajectory {
    pub fn new(sys: &dyn Diffeo, points: Vec<SeqVec>, periodic: bool) -> Result<Self> {
        if points.is_empty() || (!periodic && points.len() < 2) {
            return Err(Error::InvalidInput("pseudotrajectory too short".into()));
        }
        for y in &points {
            y.check_window(sys.window())?;
        }
        let step_errors = step_errors(sys, &points, periodic)?;
        let d = step_errors.iter().cloned().fold(0.0, f64::max);
        Ok(Pseudotrajectory { points, periodic, step_errors, d })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `‖y_{k+1} - f(y_k)‖`, wrapping when periodic.
pub fn step_errors(sys: &dyn Diffeo, points: &[SeqVec], periodic: bool) -> Result<Vec<f64>> {
    let n = points.len();
    let steps = if periodic { n } else { n - 1 };
    (0..steps).map(|k| Ok(points[(k + 1) % n].sub(&sys.forward(&points[k])?)?.norm())).collect()
}

/// Noise vector with norm at most `d`, supported on `support`.
///
/// Direction from the cube, radius uniform in `[0, d]`; coverage matters here, not the law.
fn noise(w: Window, support: Window, p: crate::seqcore::NormExp, d: f64, rng: &mut ChaCha8Rng) -> SeqVec {
    let u = SeqVec::from_fn(w, p, |i| if support.contains(i) { rng.gen_range(-1.0..1.0) } else { 0.0 });
    let n = u.norm();
    if n == 0.0 || d == 0.0 {
        return SeqVec::zeros(w, p);
    }
    u.scale(d * rng.gen_range(0.0..=1.0) / n)
}

/// `y_0 = x0`, `y_{k+1} = f(y_k) + ξ_k` with `‖ξ_k‖ ≤ d`, `length` points.
///
/// Noise lives on `support` (default: the whole window) so that mass stays clear of the edges.
pub fn make_pseudotrajectory(
    sys: &dyn Diffeo,
    x0: &SeqVec,
    length: usize,
    d: f64,
    seed: u64,
    support: Option<Window>,
) -> Result<Pseudotrajectory> {
    if length < 2 || !(d >= 0.0) {
        return Err(Error::InvalidInput("need length ≥ 2 and d ≥ 0".into()));
    }
    let w = sys.window();
    x0.check_window(w)?;
    let support = support.unwrap_or(w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(length);
    pts.push(x0.clone());
    for k in 1..length {
        let next = sys.forward(&pts[k - 1])?.add(&noise(w, support, sys.p(), d, &mut rng))?;
        guard(sys, &next, k as i64)?;
        pts.push(next);
    }
    Pseudotrajectory::new(sys, pts, false)
}

/// Periodic pseudotrajectory from an exact periodic orbit plus noise of size `d/(1+R)`, so every step error is `≤ d`.
pub fn perturb_periodic_orbit(
    sys: &dyn Diffeo,
    orbit: &[SeqVec],
    d: f64,
    seed: u64,
    support: Option<Window>,
) -> Result<Pseudotrajectory> {
    let w = sys.window();
    let support = support.unwrap_or(w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = d / (1.0 + sys.deriv_bound());
    let pts = orbit
        .iter()
        .map(|x| x.add(&noise(w, support, sys.p(), amp, &mut rng)))
        .collect::<Result<Vec<_>>>()?;
    Pseudotrajectory::new(sys, pts, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShadowOptions {
    /// Stop once the step error is at most this.
    pub target: f64,
    pub max_iter: usize,
}

impl Default for ShadowOptions {
    fn default() -> Self {
        ShadowOptions { target: 1e-11, max_iter: 64 }
    }
}

/// One refinement `z_k = y_k + d v_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineStep {
    pub points: Vec<SeqVec>,
    pub d_before: f64,
    pub d_after: f64,
    /// `max ‖z_k - y_k‖`.
    pub displacement: f64,
    pub used_fallback: bool,
    pub solver_residual: f64,
}

fn pairs_along(cert: &CLCertificate, pts: &[SeqVec]) -> Result<Vec<ProjPair>> {
    pts.iter()
        .enumerate()
        .map(|(k, y)| {
            cert.split.at_point(y).ok_or_else(|| Error::Certificate(format!("no projection at point {k}")))
        })
        .collect()
}

fn displaced(sys: &dyn Diffeo, traj: &[SeqVec], v: &[SeqVec], d: f64) -> Result<Vec<SeqVec>> {
    traj.iter()
        .zip(v)
        .enumerate()
        .map(|(k, (y, vk))| {
            let z = y.axpy(d, vk)?;
            guard(sys, &z, k as i64)?;
            Ok(z)
        })
        .collect()
}

fn max_dist(a: &[SeqVec], b: &[SeqVec]) -> Result<f64> {
    a.iter().zip(b).map(|(x, y)| x.dist(y)).try_fold(0.0f64, |m, d| Ok(m.max(d?)))
}

fn contracted(before: f64, after: f64) -> bool {
    after <= 0.5 * before * (1.0 + 1e-6)
}

/// Solves `v_{k+1} = Df(y_k) v_k + w_{k+1}` with `y_{k+1} - f(y_k) = -d w_{k+1}` and moves the points by `d v`.
///
/// Uses the Perron operator with the projections at the points themselves; if that
/// fails to halve the error, retries with the series around `Df(y_k) - Q_{k+1} Df(y_k) P_k`.
pub fn refine_once(sys: &dyn Diffeo, traj: &Pseudotrajectory, cert: &CLCertificate) -> Result<RefineStep> {
    let d = traj.d;
    if d == 0.0 {
        return Ok(RefineStep {
            points: traj.points.clone(),
            d_before: 0.0,
            d_after: 0.0,
            displacement: 0.0,
            used_fallback: false,
            solver_residual: 0.0,
        });
    }
    let pts = &traj.points;
    let n = pts.len();
    let images: Vec<SeqVec> = pts.iter().map(|y| sys.forward(y)).collect::<Result<_>>()?;
    let pairs = pairs_along(cert, pts)?;
    if traj.periodic {
        let ops: Vec<LinOp> = pts.iter().map(|y| sys.dforward(y)).collect::<Result<_>>()?;
        let invs: Vec<LinOp> = images.iter().map(|fy| sys.dinverse(fy)).collect::<Result<_>>()?;
        // w_j = -(y_j - f(y_{j-1})) / d
        let forcing: Vec<SeqVec> = (0..n)
            .map(|j| Ok(pts[j].sub(&images[(j + n - 1) % n])?.scale(-1.0 / d)))
            .collect::<Result<_>>()?;
        let prob = PeriodicProblem::new(ops, forcing)?.with_inverses(invs)?;
        let sol = periodic_green_solve_with(&prob, &pairs, cert.c, cert.lambda)?;
        let z = displaced(sys, pts, &sol.v, d)?;
        let d_after = step_errors(sys, &z, true)?.into_iter().fold(0.0, f64::max);
        return Ok(RefineStep {
            displacement: max_dist(&z, pts)?,
            points: z,
            d_before: d,
            d_after,
            used_fallback: false,
            solver_residual: sol.max_residual,
        });
    }
    let ops: Vec<LinOp> = pts[..n - 1].iter().map(|y| sys.dforward(y)).collect::<Result<_>>()?;
    let invs: Vec<LinOp> = images[..n - 1].iter().map(|fy| sys.dinverse(fy)).collect::<Result<_>>()?;
    let forcing: Vec<SeqVec> =
        (0..n - 1).map(|k| Ok(pts[k + 1].sub(&images[k])?.scale(-1.0 / d))).collect::<Result<_>>()?;
    let seq = OperatorSeq::new(0, ops)?.with_inverses(invs)?;
    let prob = InhomProblem::new(seq, forcing)?;
    let sol = perron_solve_with(&prob, &pairs)?;
    let z = displaced(sys, pts, &sol.v, d)?;
    let d_after = step_errors(sys, &z, false)?.into_iter().fold(0.0, f64::max);
    if contracted(d, d_after) {
        return Ok(RefineStep {
            displacement: max_dist(&z, pts)?,
            points: z,
            d_before: d,
            d_after,
            used_fallback: false,
            solver_residual: sol.max_residual,
        });
    }
    // invariant part of Df(y_k) as the base of a perturbation series
    let base_ops: Vec<LinOp> = (0..n - 1)
        .map(|k| {
            let b = prob.seq().op(k as i64)?;
            b.sub(&pairs[k + 1].q.compose(b)?.compose(&pairs[k].p)?)
        })
        .collect::<Result<_>>()?;
    let base = OperatorSeq::new(0, base_ops)?;
    let ns = neumann_solve_with(&prob, &base, &pairs, cert.l_const())?;
    let z = displaced(sys, pts, &ns.solution.v, d)?;
    let d_after = step_errors(sys, &z, false)?.into_iter().fold(0.0, f64::max);
    Ok(RefineStep {
        displacement: max_dist(&z, pts)?,
        points: z,
        d_before: d,
        d_after,
        used_fallback: true,
        solver_residual: ns.solution.max_residual,
    })
}

/// Outcome of iterated refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowResult {
    pub trajectory: Vec<SeqVec>,
    pub periodic: bool,
    /// Step error of the input.
    pub d: f64,
    /// `max ‖x_k - y_k‖`.
    pub sup_distance: f64,
    pub iterations: usize,
    pub final_step_error: f64,
    /// Step error before each refinement, then the final one.
    pub error_history: Vec<f64>,
    pub displacements: Vec<f64>,
    pub fallback_steps: usize,
    pub constants: ShadowConstants,
    /// Whether `d < d0_inf`, i.e. the halving is guaranteed rather than observed.
    pub within_guarantee: bool,
}

impl ShadowResult {
    /// `sup_distance / d` (zero for an exact input).
    pub fn ratio(&self) -> f64 {
        if self.d == 0.0 {
            0.0
        } else {
            self.sup_distance / self.d
        }
    }
}

/// Refines until the step error is at most `opts.target`.
///
/// Every refinement must at least halve the error; otherwise the run stops with a
/// contraction error naming which smallness condition on `d` is violated.
pub fn shadow(
    sys: &dyn Diffeo,
    traj: &Pseudotrajectory,
    cert: &CLCertificate,
    opts: &ShadowOptions,
) -> Result<ShadowResult> {
    let constants = shadowing_constants(sys, cert)?;
    let mut cur = traj.clone();
    let mut history = alloc::vec![cur.d];
    let mut displacements = Vec::new();
    let mut fallback_steps = 0;
    let mut iterations = 0;
    while cur.d > opts.target {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence(format!("step error {:e} after {iterations} refinements", cur.d)));
        }
        let step = refine_once(sys, &cur, cert)?;
        iterations += 1;
        if step.used_fallback {
            fallback_steps += 1;
        }
        if !contracted(step.d_before, step.d_after) {
            let modulus = sys.modulus();
            let d = step.d_before;
            return Err(Error::Contraction(format!(
                "refinement {iterations}: {:e} -> {:e}; conditions at d: M2' {}, M2'' {}, half {}",
                step.d_before,
                step.d_after,
                constants.cond_m2a(modulus, d),
                constants.cond_m2b(modulus, d),
                constants.cond_half(modulus, d)
            )));
        }
        displacements.push(step.displacement);
        history.push(step.d_after);
        cur = Pseudotrajectory::new(sys, step.points, traj.periodic)?;
    }
    Ok(ShadowResult {
        sup_distance: max_dist(&cur.points, &traj.points)?,
        trajectory: cur.points,
        periodic: traj.periodic,
        d: traj.d,
        iterations,
        final_step_error: cur.d,
        error_history: history,
        displacements,
        fallback_steps,
        constants,
        within_guarantee: traj.d < constants.d0_inf,
    })
}

/// [`shadow`] for a periodic pseudotrajectory; every iterate stays periodic.
pub fn shadow_periodic(
    sys: &dyn Diffeo,
    traj: &Pseudotrajectory,
    cert: &CLCertificate,
    opts: &ShadowOptions,
) -> Result<ShadowResult> {
    if !traj.periodic {
        return Err(Error::InvalidInput("pseudotrajectory is not periodic".into()));
    }
    shadow(sys, traj, cert, opts)
}

/// A periodic point near the start of a pseudo-loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPoint {
    pub point: SeqVec,
    pub period: usize,
    /// `‖x - x_0‖`.
    pub distance: f64,
    pub result: ShadowResult,
}

/// Closes a pseudo-loop `y_0 = x, ..., y_{N-1}` (the step back to `y_0` included) and shadows it periodically.
pub fn periodic_point_near(
    sys: &dyn Diffeo,
    cert: &CLCertificate,
    loop_points: Vec<SeqVec>,
    opts: &ShadowOptions,
) -> Result<PeriodicPoint> {
    let x = loop_points.first().cloned().ok_or_else(|| Error::InvalidInput("empty loop".into()))?;
    let traj = Pseudotrajectory::new(sys, loop_points, true)?;
    let result = shadow_periodic(sys, &traj, cert, opts)?;
    let point = result.trajectory[0].clone();
    Ok(PeriodicPoint { distance: point.dist(&x)?, period: result.trajectory.len(), point, result })
}

/// Pseudo-loop of `length` points: the exact orbit of `x`, closed by a jump back to `x`.
pub fn orbit_loop(sys: &dyn Diffeo, x: &SeqVec, length: usize) -> Result<Vec<SeqVec>> {
    let mut pts = alloc::vec![x.clone()];
    for k in 1..length {
        let next = sys.forward(&pts[k - 1])?;
        guard(sys, &next, k as i64)?;
        pts.push(next);
    }
    Ok(pts)
}

#[cfg(test)]
mod tests;
