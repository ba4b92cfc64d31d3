use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::ProjPair;
use crate::seqcore::{SeqVec, Window};
use crate::systems::Diffeo;
use crate::{Error, Result};

/// Supplies projections by point, by index, or both.
pub trait Splitting: Send + Sync {
    fn at_point(&self, x: &SeqVec) -> Option<ProjPair>;
    fn at_index(&self, k: i64) -> Option<ProjPair>;
    fn describe(&self) -> String;
}

/// Point- and index-independent pair.
#[derive(Debug, Clone)]
pub struct Uniform(pub ProjPair);

impl Splitting for Uniform {
    fn at_point(&self, x: &SeqVec) -> Option<ProjPair> {
        (x.window() == self.0.window()).then(|| self.0.clone())
    }
    fn at_index(&self, _k: i64) -> Option<ProjPair> {
        Some(self.0.clone())
    }
    fn describe(&self) -> String {
        "uniform".into()
    }
}

/// `P` keeps coordinates with index `≥ threshold`.
#[derive(Debug, Clone)]
pub struct IndexThreshold {
    pair: ProjPair,
    threshold: i64,
}

impl IndexThreshold {
    pub fn new(window: Window, threshold: i64) -> Self {
        IndexThreshold { pair: ProjPair::coordinates(window, |i| i >= threshold), threshold }
    }

    pub fn threshold(&self) -> i64 {
        self.threshold
    }
}

impl Splitting for IndexThreshold {
    fn at_point(&self, x: &SeqVec) -> Option<ProjPair> {
        (x.window() == self.pair.window()).then(|| self.pair.clone())
    }
    fn at_index(&self, _k: i64) -> Option<ProjPair> {
        Some(self.pair.clone())
    }
    fn describe(&self) -> String {
        format!("index_threshold({})", self.threshold)
    }
}

/// Roles of `P` and `Q` exchanged.
#[derive(Clone)]
pub struct Swapped(pub Arc<dyn Splitting>);

impl Splitting for Swapped {
    fn at_point(&self, x: &SeqVec) -> Option<ProjPair> {
        self.0.at_point(x).map(|p| p.swapped())
    }
    fn at_index(&self, k: i64) -> Option<ProjPair> {
        self.0.at_index(k).map(|p| p.swapped())
    }
    fn describe(&self) -> String {
        format!("swapped({})", self.0.describe())
    }
}

/// Point-dependent coordinate split: `P_x` keeps coordinates with `|x_i| > cut`.
///
/// Suited to products of one-dimensional maps whose derivative contracts away
/// from the origin.
#[derive(Debug, Clone)]
pub struct CoordMagnitude {
    pub window: Window,
    pub cut: f64,
}

impl Splitting for CoordMagnitude {
    fn at_point(&self, x: &SeqVec) -> Option<ProjPair> {
        if x.window() != self.window {
            return None;
        }
        Some(ProjPair::coordinates(self.window, |i| libm::fabs(x.get(i)) > self.cut))
    }
    fn at_index(&self, _k: i64) -> Option<ProjPair> {
        None
    }
    fn describe(&self) -> String {
        format!("coord_magnitude({})", self.cut)
    }
}

/// Explicit pairs for indices `start..start+len`, optionally repeated with a period.
#[derive(Debug, Clone)]
pub struct IndexFamily {
    start: i64,
    pairs: Vec<ProjPair>,
    period: Option<usize>,
}

impl IndexFamily {
    pub fn new(start: i64, pairs: Vec<ProjPair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput("empty projection family".into()));
        }
        Ok(IndexFamily { start, pairs, period: None })
    }

    /// `pairs[j]` serves every index `k ≡ start + j (mod m)`.
    pub fn periodic(start: i64, pairs: Vec<ProjPair>) -> Result<Self> {
        let m = pairs.len();
        let mut f = IndexFamily::new(start, pairs)?;
        f.period = Some(m);
        Ok(f)
    }

    pub fn pairs(&self) -> &[ProjPair] {
        &self.pairs
    }

    pub fn period(&self) -> Option<usize> {
        self.period
    }
}

impl Splitting for IndexFamily {
    fn at_point(&self, _x: &SeqVec) -> Option<ProjPair> {
        None
    }
    fn at_index(&self, k: i64) -> Option<ProjPair> {
        let j = k - self.start;
        match self.period {
            Some(m) => Some(self.pairs[j.rem_euclid(m as i64) as usize].clone()),
            None => usize::try_from(j).ok().and_then(|j| self.pairs.get(j).cloned()),
        }
    }
    fn describe(&self) -> String {
        match self.period {
            Some(m) => format!("index_family(start={}, period={m})", self.start),
            None => format!("index_family(start={}, len={})", self.start, self.pairs.len()),
        }
    }
}

/// `P_k` keeps coordinates `m ≤ k`.
#[derive(Debug, Clone)]
pub struct NoEdSplitting {
    pub window: Window,
}

impl Splitting for NoEdSplitting {
    fn at_point(&self, _x: &SeqVec) -> Option<ProjPair> {
        None
    }
    fn at_index(&self, k: i64) -> Option<ProjPair> {
        Some(ProjPair::coordinates(self.window, |m| m <= k))
    }
    fn describe(&self) -> String {
        "no_ed".into()
    }
}

/// Pushes a splitting through a conjugacy `h`: `P'_x = Dh(u) P_u Dh(u)^{-1}` with `u = h^{-1}(x)`.
#[derive(Clone)]
pub struct Transported {
    pub base: Arc<dyn Splitting>,
    pub h: Arc<dyn Diffeo>,
}

impl Transported {
    fn conj(&self, pair: &ProjPair, u: &SeqVec, x: &SeqVec) -> Result<ProjPair> {
        let dh = self.h.dforward(u)?;
        let dhi = self.h.dinverse(x)?;
        let p = dh.compose(&pair.p)?.compose(&dhi)?;
        let q = dh.compose(&pair.q)?.compose(&dhi)?;
        ProjPair::new(p, q)
    }
}

impl Splitting for Transported {
    fn at_point(&self, x: &SeqVec) -> Option<ProjPair> {
        let u = self.h.inverse(x).ok()?;
        let pair = self.base.at_point(&u)?;
        self.conj(&pair, &u, x).ok()
    }
    fn at_index(&self, k: i64) -> Option<ProjPair> {
        // only meaningful when the base does not depend on points
        let pair = self.base.at_index(k)?;
        let zero = SeqVec::zeros(self.h.window(), self.h.p());
        let u = self.h.inverse(&zero).ok()?;
        self.conj(&pair, &u, &zero).ok()
    }
    fn describe(&self) -> String {
        format!("transported({}, {})", self.base.describe(), self.h.name())
    }
}

/// Pairs attached to the points of a finite orbit; lookup by nearest point within `tol`.
#[derive(Debug, Clone)]
pub struct OrbitSplitting {
    points: Vec<SeqVec>,
    pairs: Vec<ProjPair>,
    tol: f64,
}

impl OrbitSplitting {
    pub fn new(points: Vec<SeqVec>, pairs: Vec<ProjPair>, tol: f64) -> Result<Self> {
        if points.len() != pairs.len() || points.is_empty() {
            return Err(Error::InvalidInput("orbit splitting needs one pair per point".into()));
        }
        Ok(OrbitSplitting { points, pairs, tol })
    }

    pub fn points(&self) -> &[SeqVec] {
        &self.points
    }

    pub fn pairs(&self) -> &[ProjPair] {
        &self.pairs
    }

    /// Appends the pairs of another splitting on a disjoint set of points.
    pub fn extend(&mut self, other: OrbitSplitting) {
        self.points.extend(other.points);
        self.pairs.extend(other.pairs);
    }
}

impl Splitting for OrbitSplitting {
    fn at_point(&self, x: &SeqVec) -> Option<ProjPair> {
        let mut best: Option<(f64, usize)> = None;
        for (i, y) in self.points.iter().enumerate() {
            if let Ok(d) = x.dist(y) {
                if d <= self.tol && best.map_or(true, |(b, _)| d < b) {
                    best = Some((d, i));
                }
            }
        }
        best.map(|(_, i)| self.pairs[i].clone())
    }
    fn at_index(&self, k: i64) -> Option<ProjPair> {
        usize::try_from(k).ok().and_then(|k| self.pairs.get(k).cloned())
    }
    fn describe(&self) -> String {
        format!("orbit({} points)", self.points.len())
    }
}

