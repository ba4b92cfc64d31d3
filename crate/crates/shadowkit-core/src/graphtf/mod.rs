//! Graph transform: tilting a known splitting so that it becomes invariant for a
//! perturbed operator sequence, on finite intervals and on periodic sequences.
//!
//! The stable graph maps `H_k: E^s_k -> F_k = A_k^{-1} E^u_{k+1}` are the fixed point of
//! `F ∘ Q`, where `Q` collects the nonlinear terms of the invariance equation and `F`
//! sums the linear recursion `H_k = Z_k H_{k+1} A^{ss}_k + S_k`. The unstable maps come
//! from the same machinery run on the reversed, inverted sequence.

mod orbit;

pub use orbit::{perturbed_cl_for_cocycle, perturbed_cl_for_diffeo, OrbitCert, OrbitDerivative};

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clstruct::{verify_cl_opseq, CLCertificate, CertSummary, IndexFamily, ProjPair, VerificationReport, VerifyOptions};
use crate::seqcore::{dense_norm, LinOp, Mat, NormExp, OperatorSeq, Window};
use crate::{Error, Result};

/// `L' = 1 + C²λ²/(1-λ²)`, the norm of the linear summation operator.
pub fn l_prime(c: f64, lambda: f64) -> f64 {
    1.0 + c * c * lambda * lambda / (1.0 - lambda * lambda)
}

/// Smallness condition on the perturbation size `eps` for a structure `(C, λ, R)`.
pub fn epsilon_condition(c: f64, lambda: f64, r: f64, eps: f64) -> bool {
    let lp = l_prime(c, lambda);
    let e1 = c * eps;
    let e2 = 2.0 * lp * e1;
    r * (2.0 * e1 + 2.0 * (r + e1) * e2 + (r + e1) * 2.0 * e2) <= 1.0 / (2.0 * lp)
}

/// Largest `eps` passing [`epsilon_condition`] (bisection; the left side is increasing).
pub fn max_graph_epsilon(c: f64, lambda: f64, r: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while epsilon_condition(c, lambda, r, hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if epsilon_condition(c, lambda, r, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Minimal `N ≥ 1` with `2Cλ^N ≤ λ1^N`, and `C1 = ((R+1)/λ1)^N`.
pub fn c1_formula(c: f64, lambda: f64, lambda1: f64, r: f64) -> (usize, f64) {
    let mut n = 1usize;
    while 2.0 * c * libm::pow(lambda, n as f64) > libm::pow(lambda1, n as f64) {
        n += 1;
    }
    (n, libm::pow((r + 1.0) / lambda1, n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphOptions {
    /// Target rate; `(1 + λ)/2` when absent.
    pub lambda1: Option<f64>,
    /// Stop once successive iterates differ by at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Norm for operator sequences (systems use their own).
    pub p: Option<NormExp>,
    pub verify: VerifyOptions,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions { lambda1: None, tol: 1e-12, max_iter: 200, p: None, verify: VerifyOptions::default() }
    }
}

/// Fixed-point graph maps of both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMaps {
    pub start: i64,
    /// Stable maps `H_k`, stored as `H_k P_k` on the whole window.
    pub h: Vec<LinOp>,
    /// Unstable maps `H^u_k`, stored as `H^u_k Q_k`.
    pub h_u: Vec<LinOp>,
    /// Largest `‖H_k‖` and `‖H^u_k‖`.
    pub attained: f64,
    pub attained_u: f64,
    /// Norm budgets `2L'Cε` for each side.
    pub eps2: f64,
    pub eps2_u: f64,
    pub iterations: usize,
    pub iterations_u: usize,
    /// `‖H^{l+1} - H^l‖ / ‖H^l - H^{l-1}‖` per iteration.
    pub ratios: Vec<f64>,
    pub ratios_u: Vec<f64>,
    /// Last successive difference, i.e. `‖H - F∘Q(H)‖` at the returned iterate.
    pub residual: f64,
    pub residual_u: f64,
}

/// A perturbed structure with its audit data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedCert {
    pub base: CertSummary,
    /// Constants of the result: `(C, λ)` for a zero perturbation, `(C1, λ1)` otherwise.
    pub c: f64,
    pub lambda: f64,
    pub r: f64,
    pub lambda1: f64,
    pub block_len: usize,
    /// `max(((R+1)/λ1)^N, 2C)`.
    pub c1: f64,
    /// Best constant the verifier measured for the tilted splitting.
    pub c1_empirical: f64,
    pub eps: f64,
    pub eps_u: f64,
    pub l_prime: f64,
    pub condition_ok: bool,
    pub condition_u_ok: bool,
    pub graph: GraphMaps,
    pub start: i64,
    pub period: Option<usize>,
    pub pairs: Vec<ProjPair>,
    /// `‖Q̃_{k+1} B_k P̃_k‖`.
    pub inclusion_residuals: Vec<f64>,
    /// `‖P̃_k B_k^{-1} Q̃_{k+1}‖`.
    pub unstable_inclusion_residuals: Vec<f64>,
    pub report: VerificationReport,
}

impl PerturbedCert {
    pub fn certificate(&self) -> Result<CLCertificate> {
        let fam = match self.period {
            Some(_) => IndexFamily::periodic(self.start, self.pairs.clone())?,
            None => IndexFamily::new(self.start, self.pairs.clone())?,
        };
        CLCertificate::new(self.c, self.lambda, self.r, Arc::new(fam))
    }

    pub fn max_inclusion_residual(&self) -> f64 {
        self.inclusion_residuals.iter().chain(&self.unstable_inclusion_residuals).cloned().fold(0.0, f64::max)
    }

    pub fn max_ratio(&self) -> f64 {
        self.graph.ratios.iter().chain(&self.graph.ratios_u).cloned().fold(0.0, f64::max)
    }

    /// Rows `(k, ‖H_k‖, ‖H^u_k‖, inclusion residual)`.
    pub fn table(&self, p: NormExp) -> Vec<(i64, f64, f64, f64)> {
        let n = self.graph.h.len();
        (0..n)
            .map(|i| {
                let inc = self.inclusion_residuals.get(i).copied().unwrap_or(0.0);
                (self.start + i as i64, self.graph.h[i].op_norm(p), self.graph.h_u[i].op_norm(p), inc)
            })
            .collect()
    }
}

/// Dense data of one side. Spaces are `0..=n` (or `0..m` when periodic), operators `0..n`.
struct Side {
    periodic: bool,
    ass: Vec<Mat>,
    z: Vec<Mat>,
    dp: Vec<Mat>,
    qd: Vec<Mat>,
    b: Vec<Mat>,
    p: Vec<Mat>,
}

struct SideResult {
    h: Vec<Mat>,
    iterations: usize,
    ratios: Vec<f64>,
    residual: f64,
}

impl Side {
    fn new(a: &[Mat], a_inv: &[Mat], b: &[Mat], p: Vec<Mat>, q: &[Mat], periodic: bool) -> Self {
        let n = a.len();
        let nx = |i: usize| if periodic { (i + 1) % n } else { i + 1 };
        let mut side = Side { periodic, ass: Vec::new(), z: Vec::new(), dp: Vec::new(), qd: Vec::new(), b: Vec::new(), p };
        for i in 0..n {
            let d = &b[i] - &a[i];
            side.ass.push(&side.p[nx(i)] * &a[i] * &side.p[i]);
            side.z.push(&a_inv[i] * &q[nx(i)]);
            side.dp.push(&d * &side.p[i]);
            side.qd.push(&q[nx(i)] * &d);
            side.b.push(b[i].clone());
        }
        side
    }

    fn ops(&self) -> usize {
        self.ass.len()
    }

    fn next(&self, i: usize) -> usize {
        if self.periodic {
            (i + 1) % self.ops()
        } else {
            i + 1
        }
    }

    fn spaces(&self) -> usize {
        self.p.len()
    }

    /// Nonlinear part: `S_k = Z_k (H_{k+1}(Δ_k P_k + B_k H_k) - Q_{k+1} Δ_k (P_k + H_k))`.
    fn q_map(&self, h: &[Mat]) -> Vec<Mat> {
        let mut s: Vec<Mat> = h.iter().map(|x| Mat::zeros(x.nrows(), x.ncols())).collect();
        for i in 0..self.ops() {
            let hn = &h[self.next(i)];
            let inner = hn * (&self.dp[i] + &self.b[i] * &h[i]) - &self.qd[i] * (&self.p[i] + &h[i]);
            s[i] = &self.z[i] * inner;
        }
        s
    }

    /// Linear part: solves `H_k = Z_k H_{k+1} A^{ss}_k + S_k`.
    ///
    /// On an interval the last space has no future and `H` there is `S` (zero). On a
    /// cycle the backward sweep runs `reps` times around, which sums the series to the
    /// tail cut-off.
    fn f_map(&self, s: &[Mat], reps: usize) -> Vec<Mat> {
        let n = self.ops();
        let mut h: Vec<Mat> = s.to_vec();
        if self.periodic {
            for x in h.iter_mut() {
                x.fill(0.0);
            }
            for _ in 0..reps {
                for i in (0..n).rev() {
                    h[i] = &s[i] + &self.z[i] * &h[(i + 1) % n] * &self.ass[i];
                }
            }
        } else {
            for i in (0..n).rev() {
                h[i] = &s[i] + &self.z[i] * &h[i + 1] * &self.ass[i];
            }
        }
        h
    }

    fn solve(&self, pn: NormExp, c: f64, lambda: f64, opts: &GraphOptions) -> Result<SideResult> {
        let dim = self.p[0].nrows();
        let mut h: Vec<Mat> = (0..self.spaces()).map(|_| Mat::zeros(dim, dim)).collect();
        let mut ratios = Vec::new();
        let mut prev: Option<f64> = None;
        let mut iterations = 0;
        loop {
            if iterations >= opts.max_iter {
                return Err(Error::NoConvergence(format!("graph transform after {iterations} iterations")));
            }
            let s = self.q_map(&h);
            let reps = self.periodic_reps(&s, pn, c, lambda);
            let next = self.f_map(&s, reps);
            iterations += 1;
            let diff = next.iter().zip(&h).map(|(x, y)| dense_norm(&(x - y), pn)).fold(0.0, f64::max);
            h = next;
            if let Some(pd) = prev {
                if pd > 0.0 {
                    let ratio = diff / pd;
                    ratios.push(ratio);
                    if ratio > 0.5 + 1e-9 {
                        return Err(Error::Contraction(format!(
                            "graph iteration {iterations}: ratio {ratio} exceeds 1/2"
                        )));
                    }
                }
            }
            if !diff.is_finite() {
                return Err(Error::Contraction("graph iteration diverged".into()));
            }
            if diff <= opts.tol {
                // a few more sweeps down to rounding level; forward propagation amplifies what is left
                let mut last = diff;
                for _ in 0..12 {
                    if last == 0.0 {
                        break;
                    }
                    let next = self.f_map(&self.q_map(&h), self.periodic_reps(&self.q_map(&h), pn, c, lambda));
                    let d = next.iter().zip(&h).map(|(x, y)| dense_norm(&(x - y), pn)).fold(0.0, f64::max);
                    if d > 0.5 * last {
                        break;
                    }
                    h = next;
                    iterations += 1;
                    last = d;
                }
                return Ok(SideResult { h, iterations, ratios, residual: last });
            }
            prev = Some(diff);
        }
    }

    /// Sweeps around the cycle until the tail `C²λ^{2l}/(1-λ²)` drops below `1e-16` relative to `‖S‖`.
    fn periodic_reps(&self, s: &[Mat], pn: NormExp, c: f64, lambda: f64) -> usize {
        if !self.periodic {
            return 1;
        }
        let smax = s.iter().map(|x| dense_norm(x, pn)).fold(0.0, f64::max);
        let mut l = 0usize;
        while smax > 0.0 && c * c * libm::pow(lambda, 2.0 * l as f64) / (1.0 - lambda * lambda) >= 1e-16 {
            l += 1;
        }
        l / self.ops() + 2
    }
}

/// Largest `n` with `1e-15 (R/λ)^n ≤ 1e-2 C`: beyond it, rounding in a stable vector can
/// grow along unstable directions past the bound being checked.
pub fn roundoff_horizon(c: f64, lambda: f64, r: f64) -> usize {
    let g = libm::log(r.max(1.0) / lambda);
    if g <= 0.0 {
        return usize::MAX;
    }
    libm::floor(libm::log(1e13 * c) / g).max(1.0) as usize
}

fn dense_all(ops: &[LinOp]) -> Vec<Mat> {
    ops.iter().map(LinOp::to_dense).collect()
}

fn common_window(a: &OperatorSeq, b: &OperatorSeq) -> Result<Window> {
    let w = a.ops()[0].domain();
    for op in a.ops().iter().chain(b.ops()) {
        if op.domain() != w || op.codomain() != w {
            return Err(Error::WindowMismatch { expected: w, found: op.domain() });
        }
    }
    Ok(w)
}

/// Everything the two sides need, in dense form.
struct Data {
    w: Window,
    a: Vec<Mat>,
    a_inv: Vec<Mat>,
    b: Vec<Mat>,
    b_inv: Vec<Mat>,
    p: Vec<Mat>,
    q: Vec<Mat>,
}

impl Data {
    fn collect(a: &OperatorSeq, b: &OperatorSeq, pairs: &[ProjPair]) -> Result<Self> {
        if a.interval() != b.interval() {
            return Err(Error::InvalidInput("operator sequences live on different intervals".into()));
        }
        let w = common_window(a, b)?;
        let (lo, hi) = a.interval();
        let inv = |s: &OperatorSeq| (lo..hi).map(|k| s.inv(k).map(|c| c.to_dense())).collect::<Result<Vec<_>>>();
        Ok(Data {
            w,
            a: dense_all(a.ops()),
            a_inv: inv(a)?,
            b: dense_all(b.ops()),
            b_inv: inv(b)?,
            p: pairs.iter().map(|x| x.p.to_dense()).collect(),
            q: pairs.iter().map(|x| x.q.to_dense()).collect(),
        })
    }

    /// Reversed, inverted sequence: stable and unstable exchange roles.
    fn reversed(&self, periodic: bool) -> Side {
        let n = self.a.len();
        let s = self.p.len();
        let space = |j: usize| if periodic { (s - j) % s } else { n - j };
        let op = |j: usize| n - 1 - j;
        let a: Vec<Mat> = (0..n).map(|j| self.a_inv[op(j)].clone()).collect();
        let a_inv: Vec<Mat> = (0..n).map(|j| self.a[op(j)].clone()).collect();
        let b: Vec<Mat> = (0..n).map(|j| self.b_inv[op(j)].clone()).collect();
        let p: Vec<Mat> = (0..s).map(|j| self.q[space(j)].clone()).collect();
        let q: Vec<Mat> = (0..s).map(|j| self.p[space(j)].clone()).collect();
        Side::new(&a, &a_inv, &b, p, &q, periodic)
    }
}

fn sup_diff(x: &[Mat], y: &[Mat], pn: NormExp) -> f64 {
    x.iter().zip(y).map(|(a, b)| dense_norm(&(a - b), pn)).fold(0.0, f64::max)
}

fn graph_transform_impl(
    a: &OperatorSeq,
    cert: &CLCertificate,
    pairs: &[ProjPair],
    b: &OperatorSeq,
    period: Option<usize>,
    opts: &GraphOptions,
) -> Result<PerturbedCert> {
    let (c, lambda, r) = (cert.c, cert.lambda, cert.r);
    let lambda1 = opts.lambda1.unwrap_or((1.0 + lambda) / 2.0);
    if !(lambda1 > lambda && lambda1 < 1.0) {
        return Err(Error::InvalidInput(format!("target rate {lambda1} must lie in ({lambda}, 1)")));
    }
    let pn = opts.p.unwrap_or(NormExp::Two);
    let periodic = period.is_some();
    let data = Data::collect(a, b, pairs)?;
    let n = data.a.len();
    let eps = sup_diff(&data.b, &data.a, pn);
    let eps_u = sup_diff(&data.b_inv, &data.a_inv, pn);
    let lp = l_prime(c, lambda);
    let condition_ok = epsilon_condition(c, lambda, r, eps);
    let condition_u_ok = epsilon_condition(c, lambda, r, eps_u);
    if !condition_ok {
        return Err(Error::Precondition(format!(
            "perturbation {eps:e} too large; the graph transform needs at most {:e}",
            max_graph_epsilon(c, lambda, r)
        )));
    }

    let fwd = Side::new(&data.a, &data.a_inv, &data.b, data.p.clone(), &data.q, periodic);
    let st = fwd.solve(pn, c, lambda, opts)?;
    let un = data.reversed(periodic).solve(pn, c, lambda, opts)?;

    // back to original indexing
    let s = data.p.len();
    let hu: Vec<Mat> = (0..s).map(|i| un.h[if periodic { (s - i) % s } else { n - i }].clone()).collect();

    let dim = data.w.len();
    let id = Mat::identity(dim, dim);
    let mut pairs_out = Vec::with_capacity(s);
    let mut pt_dense = Vec::with_capacity(s);
    for i in 0..s {
        let g = &st.h[i];
        let gu = &hu[i];
        let core = (&id - gu * g)
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::NotInvertible(format!("tilted splitting degenerates at {}", a.interval().0 + i as i64)))?;
        let pt = (&id + g) * core * (&data.p[i] - gu * &data.q[i]);
        let qt = &id - &pt;
        pairs_out.push(ProjPair::new(LinOp::dense(data.w, data.w, pt.clone())?, LinOp::dense(data.w, data.w, qt)?)?);
        pt_dense.push(pt);
    }
    let nx = |i: usize| if periodic { (i + 1) % s } else { i + 1 };
    let mut inc = Vec::with_capacity(n);
    let mut inc_u = Vec::with_capacity(n);
    for i in 0..n {
        let (pk, pk1) = (&pt_dense[i], &pt_dense[nx(i)]);
        inc.push(dense_norm(&((&id - pk1) * &data.b[i] * pk), pn));
        inc_u.push(dense_norm(&(pk * &data.b_inv[i] * (&id - pk1)), pn));
    }

    let (block_len, c1_raw) = c1_formula(c, lambda, lambda1, r);
    let c1 = c1_raw.max(2.0 * c);
    let zero = eps == 0.0 && eps_u == 0.0;
    let (c_res, l_res) = if zero { (c, lambda) } else { (c1, lambda1) };
    let start = a.interval().0;
    let fam = if periodic { IndexFamily::periodic(start, pairs_out.clone())? } else { IndexFamily::new(start, pairs_out.clone())? };
    let r_out = r + eps.max(eps_u);
    let out_cert = CLCertificate::new(c_res, l_res, r_out, Arc::new(fam))?;

    // decay at the target rate, over the horizon rounding errors allow
    let cap = roundoff_horizon(c_res, l_res, r_out);
    let vopts = VerifyOptions { p: Some(pn), horizon: opts.verify.horizon.min(cap).max(1), ..opts.verify.clone() };
    let report = match period {
        Some(m) => {
            let reps = (vopts.horizon / m + 2).max(2);
            let ops: Vec<LinOp> = (0..reps * m).map(|j| b.ops()[j % m].clone()).collect();
            let invs: Vec<LinOp> = (0..reps * m)
                .map(|j| b.inv(start + (j % m) as i64).map(|x| x.into_owned()))
                .collect::<Result<_>>()?;
            let ext = OperatorSeq::new(start, ops)?.with_inverses(invs)?;
            verify_cl_opseq(&ext, &out_cert, &vopts, Some(m))?
        }
        None => verify_cl_opseq(b, &out_cert, &vopts, None)?,
    };
    let mut report = report;
    if vopts.horizon < opts.verify.horizon {
        report.notes.push(format!("decay horizon capped at {} by rounding growth", vopts.horizon));
    }
    let c1_empirical = report.max_proj_norm.max(report.worst_decay_ratio * c_res);
    if !report.pass {
        return Err(Error::Certificate(format!(
            "tilted splitting fails at (C, λ) = ({c_res}, {l_res}): proj {}, inclusion {:e}, decay ratio {}",
            report.max_proj_norm, report.max_inclusion_residual, report.worst_decay_ratio
        )));
    }

    let to_ops = |hs: &[Mat]| -> Result<Vec<LinOp>> { hs.iter().map(|h| LinOp::dense(data.w, data.w, h.clone())).collect() };
    let attained = st.h.iter().map(|h| dense_norm(h, pn)).fold(0.0, f64::max);
    let attained_u = hu.iter().map(|h| dense_norm(h, pn)).fold(0.0, f64::max);
    let graph = GraphMaps {
        start,
        h: to_ops(&st.h)?,
        h_u: to_ops(&hu)?,
        attained,
        attained_u,
        eps2: 2.0 * lp * c * eps,
        eps2_u: 2.0 * lp * c * eps_u,
        iterations: st.iterations,
        iterations_u: un.iterations,
        ratios: st.ratios,
        ratios_u: un.ratios,
        residual: st.residual,
        residual_u: un.residual,
    };
    Ok(PerturbedCert {
        base: cert.summary(),
        c: c_res,
        lambda: l_res,
        r: r_out,
        lambda1,
        block_len,
        c1,
        c1_empirical,
        eps,
        eps_u,
        l_prime: lp,
        condition_ok,
        condition_u_ok,
        graph,
        start,
        period,
        pairs: pairs_out,
        inclusion_residuals: inc,
        unstable_inclusion_residuals: inc_u,
        report,
    })
}

/// Perturbed structure for `B` near `A` on a finite interval.
pub fn graph_transform_seq(
    a: &OperatorSeq,
    cert: &CLCertificate,
    b: &OperatorSeq,
    opts: &GraphOptions,
) -> Result<PerturbedCert> {
    let (lo, hi) = a.interval();
    let pairs = cert.index_pairs(lo, hi)?;
    graph_transform_impl(a, cert, &pairs, b, None, opts)
}

/// Periodic variant: `a` and `b` hold one period each; the output projections repeat exactly.
pub fn graph_transform_periodic(
    a: &OperatorSeq,
    cert: &CLCertificate,
    b: &OperatorSeq,
    opts: &GraphOptions,
) -> Result<PerturbedCert> {
    let (lo, hi) = a.interval();
    let m = (hi - lo) as usize;
    let mut pairs = cert.index_pairs(lo, hi)?;
    if pairs[m].p.max_abs_diff(&pairs[0].p)? != 0.0 {
        return Err(Error::Precondition("base splitting is not periodic with the operator period".into()));
    }
    pairs.truncate(m);
    graph_transform_impl(a, cert, &pairs, b, Some(m), opts)
}

/// Short label for reports.
pub fn describe(pc: &PerturbedCert) -> String {
    format!(
        "graph transform: eps {:e}, |H| {:e} (budget {:e}), iterations {}/{}, C1 {} (measured {}), lambda1 {}",
        pc.eps, pc.graph.attained, pc.graph.eps2, pc.graph.iterations, pc.graph.iterations_u, pc.c1, pc.c1_empirical, pc.lambda1
    )
}
