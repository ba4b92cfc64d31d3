use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{graph_transform_impl, max_graph_epsilon, GraphOptions, PerturbedCert};
use crate::clstruct::{CLCertificate, OrbitSplitting, ProjPair};
use crate::seqcore::{OperatorSeq, SeqVec};
use crate::shadow::{shadow, shadowing_constants, Pseudotrajectory, ShadowOptions};
use crate::systems::Diffeo;
use crate::{Error, Result};

/// Which derivative the perturbed sequence carries along the `g`-orbit `y_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitDerivative {
    /// `Dg(y_k)`: the structure of `g` itself.
    Own,
    /// `Df(y_k)`: the `(g, Df)` cocycle.
    Base,
}

/// A structure for `g` certified along one of its orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitCert {
    pub perturbed: PerturbedCert,
    pub derivative: OrbitDerivative,
    pub g_orbit: Vec<SeqVec>,
    /// The `f`-orbit shadowing it.
    pub f_orbit: Vec<SeqVec>,
    pub periodic: bool,
    /// Step error of the `g`-orbit seen as an `f`-pseudotrajectory.
    pub step_error: f64,
    pub shadow_distance: f64,
    /// `max ‖Df(x_k) - Dg(y_k)‖`.
    pub max_gap: f64,
    /// Graph-transform budget `ε`.
    pub eps_budget: f64,
    /// Lookup radius of the attached splitting.
    pub tol: f64,
}

impl OrbitCert {
    /// Certificate for `g` that knows the projections at the orbit points only.
    pub fn certificate(&self) -> Result<CLCertificate> {
        let split = OrbitSplitting::new(self.g_orbit.clone(), self.perturbed.pairs_along(self.g_orbit.len()), self.tol)?;
        CLCertificate::new(self.perturbed.c, self.perturbed.lambda, self.perturbed.r, Arc::new(split))
    }
}

impl PerturbedCert {
    /// Pairs for `len` consecutive indices from the start (repeating when periodic).
    pub fn pairs_along(&self, len: usize) -> Vec<ProjPair> {
        (0..len).map(|i| self.pairs[i % self.pairs.len()].clone()).collect()
    }
}

fn min_separation(pts: &[SeqVec]) -> Result<f64> {
    let mut m = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            m = m.min(pts[i].dist(&pts[j])?);
        }
    }
    Ok(m)
}

/// Structure of `(g, Dg)` along an exact `g`-orbit, for `g` with `‖f - g‖_{C¹} ≤ delta`.
///
/// The orbit is shadowed by an `f`-orbit `x_k`; the derivatives `Df(x_k)` carry the base
/// structure, and the graph transform tilts it onto `Dg(y_k)`. A periodic orbit stores one
/// period and takes the periodic route throughout.
pub fn perturbed_cl_for_diffeo(
    f: &dyn Diffeo,
    cert: &CLCertificate,
    g: &dyn Diffeo,
    delta: f64,
    orbit: &[SeqVec],
    periodic: bool,
    opts: &GraphOptions,
) -> Result<OrbitCert> {
    perturbed_along(f, cert, g, delta, orbit, periodic, opts, OrbitDerivative::Own)
}

/// Same as [`perturbed_cl_for_diffeo`] for the cocycle `(g, Df)`: the operators along the
/// `g`-orbit are `Df(y_k)`.
pub fn perturbed_cl_for_cocycle(
    f: &dyn Diffeo,
    cert: &CLCertificate,
    g: &dyn Diffeo,
    delta: f64,
    orbit: &[SeqVec],
    periodic: bool,
    opts: &GraphOptions,
) -> Result<OrbitCert> {
    perturbed_along(f, cert, g, delta, orbit, periodic, opts, OrbitDerivative::Base)
}

#[allow(clippy::too_many_arguments)]
fn perturbed_along(
    f: &dyn Diffeo,
    cert: &CLCertificate,
    g: &dyn Diffeo,
    delta: f64,
    orbit: &[SeqVec],
    periodic: bool,
    opts: &GraphOptions,
    derivative: OrbitDerivative,
) -> Result<OrbitCert> {
    let len = orbit.len();
    if len < 2 && !periodic {
        return Err(Error::InvalidInput("orbit needs at least two points".into()));
    }
    let eps_budget = max_graph_epsilon(cert.c, cert.lambda, cert.r);
    let consts = shadowing_constants(f, cert)?;
    if !(delta < eps_budget / 2.0) || !(delta < consts.d0) {
        return Err(Error::Precondition(format!(
            "C¹ distance {delta:e} must stay below eps/2 = {:e} and d0 = {:e}",
            eps_budget / 2.0,
            consts.d0
        )));
    }
    // the orbit must really be a g-orbit
    let steps = if periodic { len } else { len - 1 };
    for k in 0..steps {
        let gap = g.forward(&orbit[k])?.dist(&orbit[(k + 1) % len])?;
        if gap > 1e-10 * (1.0 + orbit[k].norm()) {
            return Err(Error::InvalidInput(format!("point {k} is not mapped to its successor by g ({gap:e})")));
        }
    }
    let traj = Pseudotrajectory::new(f, orbit.to_vec(), periodic)?;
    let sh = shadow(f, &traj, cert, &ShadowOptions::default())?;
    let x = &sh.trajectory;

    let nxt = |k: usize| (k + 1) % len;
    let mut a_ops = Vec::with_capacity(steps);
    let mut a_inv = Vec::with_capacity(steps);
    let mut b_ops = Vec::with_capacity(steps);
    let mut b_inv = Vec::with_capacity(steps);
    for k in 0..steps {
        a_ops.push(f.dforward(&x[k])?);
        a_inv.push(f.dinverse(&x[nxt(k)])?);
        match derivative {
            OrbitDerivative::Own => {
                b_ops.push(g.dforward(&orbit[k])?);
                b_inv.push(g.dinverse(&orbit[nxt(k)])?);
            }
            OrbitDerivative::Base => {
                b_ops.push(f.dforward(&orbit[k])?);
                b_inv.push(f.dinverse(&f.forward(&orbit[k])?)?);
            }
        }
    }
    let pn = f.p();
    let max_gap = a_ops.iter().zip(&b_ops).map(|(a, b)| a.sub(b).map(|d| d.op_norm(pn))).try_fold(0.0f64, |m, d| d.map(|d| m.max(d)))?;
    if !(max_gap < eps_budget) {
        return Err(Error::Precondition(format!("derivative gap {max_gap:e} exceeds eps = {eps_budget:e}")));
    }
    let pairs: Vec<ProjPair> = (0..len)
        .map(|k| cert.split.at_point(&x[k]).ok_or_else(|| Error::Certificate(format!("no projection at orbit point {k}"))))
        .collect::<Result<_>>()?;
    let a_seq = OperatorSeq::new(0, a_ops)?.with_inverses(a_inv)?;
    let b_seq = OperatorSeq::new(0, b_ops)?.with_inverses(b_inv)?;
    let gopts = GraphOptions { p: Some(pn), ..opts.clone() };
    let perturbed = graph_transform_impl(&a_seq, cert, &pairs, &b_seq, periodic.then_some(len), &gopts)?;
    let tol = if len > 1 { (0.25 * min_separation(orbit)?).min(1e-9) } else { 1e-9 };
    Ok(OrbitCert {
        perturbed,
        derivative,
        g_orbit: orbit.to_vec(),
        f_orbit: x.clone(),
        periodic,
        step_error: traj.d,
        shadow_distance: sh.sup_distance,
        max_gap,
        eps_budget,
        tol,
    })
}
