//! Pointwise semi-conjugacies between a diffeomorphism `f` and a C¹-close `g`.
//!
//! `h1` solves `g ∘ (Id + h1) = (Id + h1) ∘ f` and `h2` solves
//! `f ∘ (Id + h2) = (Id + h2) ∘ g`. Both fixed-point equations couple values along a
//! single orbit only, so each value is computed on a truncated orbit around the
//! point: `h1` along the `f`-orbit with the structure of `(f, Df)`, `h2` along the
//! `g`-orbit with the structure of `(g, Df)` obtained from the graph transform.

use alloc::borrow::Cow;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::boundedsol::sweep;
use crate::clstruct::{verify_cl_opseq, CLCertificate, Cocycle, IndexFamily, ProjPair, VerifyOptions};
use crate::graphtf::{c1_formula, max_graph_epsilon, perturbed_cl_for_cocycle, roundoff_horizon, GraphOptions};
use crate::seqcore::{sup_norm, LinOp, NormExp, OperatorSeq, SeqVec};
use crate::shadow::shadowing_constants;
use crate::systems::{guard, orbit_segment, s_remainder, Diffeo};
use crate::{Error, Result};

/// Largest admissible Perron tail `C λ^T ‖w‖ / (1-λ)`.
pub const TAIL_TOL: f64 = 1e-12;

/// `C λ^T w / (1-λ)`.
pub fn tail_bound(c: f64, lambda: f64, t: usize, w_sup: f64) -> f64 {
    c * libm::pow(lambda, t as f64) * w_sup / (1.0 - lambda)
}

/// Smallest `T` with [`tail_bound`] below [`TAIL_TOL`].
pub fn min_truncation(c: f64, lambda: f64, w_sup: f64) -> usize {
    let mut t = 1;
    while tail_bound(c, lambda, t, w_sup) >= TAIL_TOL && t < 100_000 {
        t += 1;
    }
    t
}

fn check_tail(c: f64, lambda: f64, t: usize, w_sup: f64) -> Result<()> {
    let tail = tail_bound(c, lambda, t, w_sup);
    if tail >= TAIL_TOL {
        return Err(Error::Precondition(format!(
            "orbit truncation {t} leaves a tail of {tail:e}; need T >= {}",
            min_truncation(c, lambda, w_sup)
        )));
    }
    Ok(())
}

/// Orbit `x_{-T}, ..., x_T` of a cocycle base, guarded at every step.
fn cocycle_orbit(coc: &dyn Cocycle, x: &SeqVec, t: usize) -> Result<Vec<SeqVec>> {
    let mut back = Vec::with_capacity(2 * t + 1);
    let mut cur = x.clone();
    for n in 1..=t {
        cur = coc.step_back(&cur)?;
        if coc.couples_coordinates() {
            crate::seqcore::truncation_guard(&cur, -(n as i64))?;
        }
        back.push(cur.clone());
    }
    back.reverse();
    back.push(x.clone());
    let mut cur = x.clone();
    for n in 1..=t {
        cur = coc.step(&cur)?;
        if coc.couples_coordinates() {
            crate::seqcore::truncation_guard(&cur, n as i64)?;
        }
        back.push(cur.clone());
    }
    Ok(back)
}

/// Truncated orbit with its operators and projections, indexed `-T..=T`.
struct Frame {
    pts: Vec<SeqVec>,
    seq: OperatorSeq,
    invs: Vec<LinOp>,
    pairs: Vec<ProjPair>,
    c: f64,
    lambda: f64,
    t: usize,
    p: NormExp,
}

impl Frame {
    fn new(pts: Vec<SeqVec>, ops: Vec<LinOp>, invs: Vec<LinOp>, pairs: Vec<ProjPair>, c: f64, lambda: f64) -> Result<Self> {
        let t = (pts.len() - 1) / 2;
        let p = pts[0].p();
        let seq = OperatorSeq::new(-(t as i64), ops)?;
        Ok(Frame { pts, seq, invs, pairs, c, lambda, t, p })
    }

    fn from_cocycle(coc: &dyn Cocycle, cert: &CLCertificate, x: &SeqVec, t: usize) -> Result<Self> {
        let pts = cocycle_orbit(coc, x, t)?;
        let ops = pts[..2 * t].iter().map(|y| coc.op(y)).collect::<Result<Vec<_>>>()?;
        let invs = pts[1..].iter().map(|y| coc.op_back(y)).collect::<Result<Vec<_>>>()?;
        let pairs = pts
            .iter()
            .enumerate()
            .map(|(i, y)| {
                cert.split
                    .at_point(y)
                    .ok_or_else(|| Error::Certificate(format!("no projection at orbit point {}", i as i64 - t as i64)))
            })
            .collect::<Result<Vec<_>>>()?;
        Frame::new(pts, ops, invs, pairs, cert.c, cert.lambda)
    }

    /// Truncated Perron sums for forcing `w_{-T+1}, ..., w_T`.
    fn solve(&self, w: &[SeqVec]) -> Result<Vec<SeqVec>> {
        check_tail(self.c, self.lambda, self.t, sup_norm(w))?;
        let invs: Vec<Cow<'_, LinOp>> = self.invs.iter().map(Cow::Borrowed).collect();
        sweep(&self.seq, &invs, w, &self.pairs, self.p)
    }
}

/// Truncated Perron value `v(x) = Σ_{i≤0} A^{-i} P w(α^i x) - Σ_{i>0} A^{-i} Q w(α^i x)`
/// over `|i| ≤ T`, which solves `v(α(x)) - A(x) v(x) = w(α(x))` up to the tail.
pub fn orbit_perron_apply(
    coc: &dyn Cocycle,
    cert: &CLCertificate,
    w: &dyn Fn(&SeqVec) -> Result<SeqVec>,
    x: &SeqVec,
    t: usize,
) -> Result<SeqVec> {
    if t == 0 {
        return Err(Error::InvalidInput("orbit truncation must be at least 1".into()));
    }
    let frame = Frame::from_cocycle(coc, cert, x, t)?;
    let forcing = frame.pts[1..].iter().map(|y| w(y)).collect::<Result<Vec<_>>>()?;
    Ok(frame.solve(&forcing)?.swap_remove(t))
}

/// Iteration settings for the two fixed points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConjOptions {
    /// Stop once successive iterates differ by at most this (sup over the orbit).
    pub tol: f64,
    pub max_iter: usize,
    /// Try the base constants `(C, λ)` for the `(g, Df)` structure before falling back to
    /// the graph-transform constants.
    pub tighten: bool,
    pub graph: GraphOptions,
}

impl Default for ConjOptions {
    fn default() -> Self {
        ConjOptions { tol: 1e-11, max_iter: 200, tighten: true, graph: GraphOptions::default() }
    }
}

/// Constants of a semi-conjugacy computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JobConstants {
    /// Bound on `‖f - g‖_{C¹}`.
    pub d: f64,
    pub c: f64,
    pub lambda: f64,
    pub r: f64,
    /// Constants of the perturbed cocycle.
    pub c1: f64,
    pub lambda1: f64,
    /// `C1²(1+λ1)/(1-λ1)`.
    pub l: f64,
    /// Graph-transform and shadowing limit on `d`.
    pub delta: f64,
    /// `min(δ, 1/(3L))`.
    pub d0: f64,
    pub truncation: usize,
}

/// `f`, `g = f + Δ`, the structure of `f` and the truncation `T`.
pub struct ConjugacyJob<'a> {
    pub f: &'a dyn Diffeo,
    pub g: &'a dyn Diffeo,
    pub cert: CLCertificate,
    pub consts: JobConstants,
    pub opts: ConjOptions,
}

impl<'a> ConjugacyJob<'a> {
    /// Checks `d < d0 = min(δ, 1/(3L))`.
    pub fn new(
        f: &'a dyn Diffeo,
        g: &'a dyn Diffeo,
        cert: CLCertificate,
        d: f64,
        truncation: usize,
        opts: ConjOptions,
    ) -> Result<Self> {
        if f.window() != g.window() || f.p() != g.p() {
            return Err(Error::InvalidInput("f and g live on different spaces".into()));
        }
        if truncation == 0 {
            return Err(Error::InvalidInput("orbit truncation must be at least 1".into()));
        }
        let (c, lambda, r) = (cert.c, cert.lambda, cert.r);
        let lambda1 = opts.graph.lambda1.unwrap_or((1.0 + lambda) / 2.0);
        if !(lambda1 > lambda && lambda1 < 1.0) {
            return Err(Error::InvalidInput(format!("target rate {lambda1} must lie in ({lambda}, 1)")));
        }
        let c1 = c1_formula(c, lambda, lambda1, r).1.max(2.0 * c);
        let l = c1 * c1 * (1.0 + lambda1) / (1.0 - lambda1);
        let delta = (max_graph_epsilon(c, lambda, r) / 2.0).min(shadowing_constants(f, &cert)?.d0);
        let d0 = delta.min(1.0 / (3.0 * l));
        if !(d >= 0.0 && d < d0) {
            return Err(Error::Precondition(format!("C¹ distance {d:e} must lie below d0 = {d0:e}")));
        }
        let consts = JobConstants { d, c, lambda, r, c1, lambda1, l, delta, d0, truncation };
        Ok(ConjugacyJob { f, g, cert, consts, opts })
    }

    /// Same job with another truncation.
    pub fn with_truncation(&self, truncation: usize) -> Result<Self> {
        ConjugacyJob::new(self.f, self.g, self.cert.clone(), self.consts.d, truncation, self.opts.clone())
    }

    /// `Δ(z) = g(z) - f(z)`.
    pub fn delta_at(&self, z: &SeqVec) -> Result<SeqVec> {
        self.g.forward(z)?.sub(&self.f.forward(z)?)
    }

    /// `‖Δ(z)‖` and `‖DΔ(z)‖` must stay below `d` where they are used.
    fn check_distance(&self, z: &SeqVec) -> Result<()> {
        let d = self.consts.d;
        let c0 = self.delta_at(z)?.norm();
        let c1 = self.g.dforward(z)?.sub(&self.f.dforward(z)?)?.op_norm(self.f.p());
        if c0 > d || c1 > d {
            return Err(Error::Precondition(format!("‖g - f‖ = {c0:e}, ‖Dg - Df‖ = {c1:e} exceed d = {d:e}")));
        }
        Ok(())
    }
}

/// One pointwise value of `h1` or `h2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HValue {
    pub point: SeqVec,
    /// `h(x)`.
    pub value: SeqVec,
    /// Image of `x` under the map whose orbit carries the equation.
    pub image: SeqVec,
    /// `h` at the image, from the same orbit solve.
    pub value_at_image: SeqVec,
    /// Largest `‖h‖` along the truncated orbit.
    pub sup_norm: f64,
    pub iterations: usize,
    pub ratios: Vec<f64>,
    /// Last successive difference.
    pub last_diff: f64,
    /// Residual of the conjugacy equation at `x`.
    pub residual: f64,
    /// Constants used by the Perron sums.
    pub c: f64,
    pub lambda: f64,
    pub truncation: usize,
}

impl HValue {
    pub fn norm(&self) -> f64 {
        self.value.norm()
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }
}

/// Iterates `u <- S(G(u))` on the frame; `bound` is the admissible contraction factor.
fn fixed_point(
    frame: &Frame,
    forcing: &dyn Fn(&[SeqVec]) -> Result<Vec<SeqVec>>,
    bound: f64,
    opts: &ConjOptions,
) -> Result<(Vec<SeqVec>, usize, Vec<f64>, f64)> {
    let mut u: Vec<SeqVec> = frame.pts.iter().map(|y| SeqVec::zeros(y.window(), frame.p)).collect();
    let mut ratios = Vec::new();
    let mut prev: Option<f64> = None;
    let mut iterations = 0;
    loop {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence(format!("semi-conjugacy after {iterations} iterations")));
        }
        let next = frame.solve(&forcing(&u)?)?;
        iterations += 1;
        let mut diff = 0.0f64;
        for (a, b) in next.iter().zip(&u) {
            diff = diff.max(a.dist(b)?);
        }
        u = next;
        if !diff.is_finite() {
            return Err(Error::Contraction("semi-conjugacy iteration diverged".into()));
        }
        if let Some(pd) = prev {
            // below this the ratio measures rounding, not the map
            if pd > 1e-13 {
                let ratio = diff / pd;
                ratios.push(ratio);
                if ratio > bound + 1e-9 {
                    return Err(Error::Contraction(format!(
                        "semi-conjugacy iteration {iterations}: ratio {ratio} exceeds {bound}"
                    )));
                }
            }
        }
        if diff <= opts.tol {
            return Ok((u, iterations, ratios, diff));
        }
        prev = Some(diff);
    }
}

/// `h1(x)`: fixed point of `u_{k+1} = Df(x_k) u_k + s_f(x_k, u_k) + Δ(x_k + u_k)` along the
/// `f`-orbit of `x`.
pub fn h1_at(job: &ConjugacyJob<'_>, x: &SeqVec) -> Result<HValue> {
    let t = job.consts.truncation;
    let f = job.f;
    let pts = orbit_segment(f, x, t, t)?;
    let ops = pts[..2 * t].iter().map(|y| f.dforward(y)).collect::<Result<Vec<_>>>()?;
    let invs = pts[1..].iter().map(|y| f.dinverse(y)).collect::<Result<Vec<_>>>()?;
    let pairs = pts
        .iter()
        .map(|y| job.cert.split.at_point(y).ok_or_else(|| Error::Certificate("no projection along the f-orbit".into())))
        .collect::<Result<Vec<_>>>()?;
    let frame = Frame::new(pts, ops, invs, pairs, job.cert.c, job.cert.lambda)?;
    job.check_distance(x)?;
    let forcing = |u: &[SeqVec]| -> Result<Vec<SeqVec>> {
        (0..2 * t)
            .map(|k| {
                let z = frame.pts[k].add(&u[k])?;
                s_remainder(f, &frame.pts[k], &u[k])?.add(&job.delta_at(&z)?)
            })
            .collect()
    };
    let (u, iterations, ratios, last_diff) = fixed_point(&frame, &forcing, 2.0 / 3.0, &job.opts)?;
    let (h0, h1) = (&u[t], &u[t + 1]);
    let image = frame.pts[t + 1].clone();
    let residual = job.g.forward(&x.add(h0)?)?.dist(&image.add(h1)?)?;
    Ok(HValue {
        point: x.clone(),
        value: h0.clone(),
        image,
        value_at_image: h1.clone(),
        sup_norm: sup_norm(&u),
        iterations,
        ratios,
        last_diff,
        residual,
        c: frame.c,
        lambda: frame.lambda,
        truncation: t,
    })
}

/// Constants for the `(g, Df)` structure along a `g`-orbit, with its projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocycleStructure {
    pub c: f64,
    pub lambda: f64,
    /// Graph-transform constants.
    pub c1: f64,
    pub lambda1: f64,
    /// Whether the tilted projections also pass at the base constants.
    pub tightened: bool,
    pub pairs: Vec<ProjPair>,
}

/// Structure of `(g, Df)` along the `g`-orbit `pts` (indexed `-T..=T`).
fn g_structure(job: &ConjugacyJob<'_>, pts: &[SeqVec], ops: &[LinOp], invs: &[LinOp]) -> Result<CocycleStructure> {
    let f = job.f;
    let oc = perturbed_cl_for_cocycle(f, &job.cert, job.g, job.consts.d, pts, false, &job.opts.graph)?;
    let pc = oc.perturbed;
    let mut st = CocycleStructure {
        c: pc.c,
        lambda: pc.lambda,
        c1: pc.c,
        lambda1: pc.lambda,
        tightened: false,
        pairs: pc.pairs,
    };
    let (c, lambda) = (job.cert.c, job.cert.lambda);
    if job.opts.tighten && (pc.c, pc.lambda) != (c, lambda) {
        let start = -(((pts.len() - 1) / 2) as i64);
        let seq = OperatorSeq::new(start, ops.to_vec())?.with_inverses(invs.to_vec())?;
        let fam = IndexFamily::new(start, st.pairs.clone())?;
        let base = CLCertificate::new(c, lambda, pc.r, Arc::new(fam))?;
        let horizon = job.opts.graph.verify.horizon.min(roundoff_horizon(c, lambda, pc.r)).max(1);
        let vopts = VerifyOptions { p: Some(f.p()), horizon, ..job.opts.graph.verify.clone() };
        if verify_cl_opseq(&seq, &base, &vopts, None)?.pass {
            st.c = c;
            st.lambda = lambda;
            st.tightened = true;
        }
    }
    Ok(st)
}

/// `h2(x)`: fixed point of `u_{k+1} = Df(y_k) u_k + s_f(y_k, u_k) - Δ(y_k)` along the
/// `g`-orbit `y_k` of `x`, with the `(g, Df)` structure from the graph transform.
pub fn h2_at(job: &ConjugacyJob<'_>, x: &SeqVec) -> Result<HValue> {
    Ok(h2_with_structure(job, x)?.0)
}

/// [`h2_at`] together with the `(g, Df)` structure it used.
pub fn h2_with_structure(job: &ConjugacyJob<'_>, x: &SeqVec) -> Result<(HValue, CocycleStructure)> {
    let t = job.consts.truncation;
    let f = job.f;
    let pts = orbit_segment(job.g, x, t, t)?;
    let ops = pts[..2 * t].iter().map(|y| f.dforward(y)).collect::<Result<Vec<_>>>()?;
    let invs = pts[..2 * t].iter().map(|y| f.dinverse(&f.forward(y)?)).collect::<Result<Vec<_>>>()?;
    let st = g_structure(job, &pts, &ops, &invs)?;
    let frame = Frame::new(pts, ops, invs, st.pairs.clone(), st.c, st.lambda)?;
    job.check_distance(x)?;
    let deltas = frame.pts[..2 * t].iter().map(|y| job.delta_at(y)).collect::<Result<Vec<_>>>()?;
    let forcing = |u: &[SeqVec]| -> Result<Vec<SeqVec>> {
        (0..2 * t).map(|k| s_remainder(f, &frame.pts[k], &u[k])?.sub(&deltas[k])).collect()
    };
    let (u, iterations, ratios, last_diff) = fixed_point(&frame, &forcing, 1.0 / 3.0, &job.opts)?;
    let (h0, h1) = (&u[t], &u[t + 1]);
    let image = frame.pts[t + 1].clone();
    let residual = f.forward(&x.add(h0)?)?.dist(&image.add(h1)?)?;
    let hv = HValue {
        point: x.clone(),
        value: h0.clone(),
        image,
        value_at_image: h1.clone(),
        sup_norm: sup_norm(&u),
        iterations,
        ratios,
        last_diff,
        residual,
        c: frame.c,
        lambda: frame.lambda,
        truncation: t,
    };
    Ok((hv, st))
}

/// `‖g(x + h1(x)) - (f(x) + h1(f(x)))‖` with `h1(f(x))` evaluated on its own orbit.
pub fn equivariance_h1(job: &ConjugacyJob<'_>, x: &SeqVec) -> Result<f64> {
    let here = h1_at(job, x)?;
    let fx = job.f.forward(x)?;
    guard(job.f, &fx, 1)?;
    let there = h1_at(job, &fx)?;
    job.g.forward(&x.add(&here.value)?)?.dist(&fx.add(&there.value)?)
}

/// `‖h2(x) + h1(x + h2(x))‖`, i.e. how far `(Id + h1) ∘ (Id + h2)` is from the identity at `x`.
/// Reported only: nothing says it vanishes.
pub fn composition_probe(job: &ConjugacyJob<'_>, x: &SeqVec, h2x: &SeqVec) -> Result<f64> {
    let z = x.add(h2x)?;
    Ok(h2x.add(&h1_at(job, &z)?.value)?.norm())
}

/// `‖h1(x + η e_0) - h1(x)‖ / η`, a finite-difference look at continuity.
pub fn continuity_probe(job: &ConjugacyJob<'_>, x: &SeqVec, eta: f64) -> Result<f64> {
    let a = h1_at(job, x)?;
    let mut y = x.clone();
    let i = x.window().lo.max(0).min(x.window().hi);
    y.set(i, x.get(i) + eta)?;
    let b = h1_at(job, &y)?;
    Ok(b.value.dist(&a.value)? / eta)
}

/// CSV row of a semi-conjugacy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjRow {
    pub point: usize,
    pub h1_norm: f64,
    pub h2_norm: f64,
    pub residual1: f64,
    pub residual2: f64,
    pub composition: f64,
}

/// Everything measured at one sample point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjSample {
    pub row: ConjRow,
    /// `‖x‖`, for the relative residual tolerance.
    pub x_norm: f64,
    pub equivariance1: f64,
    /// Changes of `h1(x)`, `h2(x)` when `T` doubles.
    pub h1_change: Option<f64>,
    pub h2_change: Option<f64>,
    pub h1_ratio: f64,
    pub h2_ratio: f64,
    pub h1_iterations: usize,
    pub h2_iterations: usize,
    pub structure_c: f64,
    pub structure_lambda: f64,
    pub tightened: bool,
}

/// All measurements at one point; `doubled` is the same job with `2T` when the
/// truncation check is wanted.
pub fn evaluate_point(
    job: &ConjugacyJob<'_>,
    doubled: Option<&ConjugacyJob<'_>>,
    id: usize,
    x: &SeqVec,
) -> Result<ConjSample> {
    let h1 = h1_at(job, x)?;
    let (h2, st) = h2_with_structure(job, x)?;
    let composition = composition_probe(job, x, &h2.value)?;
    let equivariance1 = equivariance_h1(job, x)?;
    let (h1_change, h2_change) = match doubled {
        Some(j2) => (Some(h1_at(j2, x)?.value.dist(&h1.value)?), Some(h2_at(j2, x)?.value.dist(&h2.value)?)),
        None => (None, None),
    };
    Ok(ConjSample {
        row: ConjRow {
            point: id,
            h1_norm: h1.norm(),
            h2_norm: h2.norm(),
            residual1: h1.residual,
            residual2: h2.residual,
            composition,
        },
        x_norm: x.norm(),
        equivariance1,
        h1_change,
        h2_change,
        h1_ratio: h1.max_ratio(),
        h2_ratio: h2.max_ratio(),
        h1_iterations: h1.iterations,
        h2_iterations: h2.iterations,
        structure_c: st.c,
        structure_lambda: st.lambda,
        tightened: st.tightened,
    })
}
