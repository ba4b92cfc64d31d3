use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CLCertificate, Cocycle, DiffeoCocycle, ProjPair};
use crate::seqcore::{truncation_guard, LinOp, Mat, NormExp, OperatorSeq, SeqVec, Window};
use crate::systems::Diffeo;
use crate::{Error, Result};

/// Knobs shared by all verifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyOptions {
    pub horizon: usize,
    pub n_dirs: usize,
    pub coordinate_dirs: bool,
    /// Algebraic identities and inclusions.
    pub tol: f64,
    /// Decay ratios.
    pub decay_tol: f64,
    pub seed: u64,
    /// Label of the first sample, so that split runs draw the same directions.
    pub first_sample: usize,
    /// End propagation once the orbit leaves the points the certificate knows.
    pub stop_outside_cert: bool,
    /// Exponent for operator sequences (systems use their own).
    pub p: Option<NormExp>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            horizon: 40,
            n_dirs: 16,
            coordinate_dirs: true,
            tol: 1e-9,
            decay_tol: 1e-6,
            seed: 0,
            first_sample: 0,
            stop_outside_cert: false,
            p: None,
        }
    }
}

/// Where a worst case happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub check: String,
    pub sample: usize,
    pub index: Option<i64>,
    pub point: Option<SeqVec>,
    pub direction: Option<SeqVec>,
    pub n: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Witnesses {
    pub proj: Option<Witness>,
    pub inclusion: Option<Witness>,
    pub defect: Option<Witness>,
    pub decay: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub c: f64,
    pub lambda: f64,
    pub tol: f64,
    pub decay_tol: f64,
    pub max_proj_norm: f64,
    pub max_inclusion_residual: f64,
    /// `‖P_{k+1} A_k Q_k‖`, only for dichotomy checks.
    pub max_reverse_residual: Option<f64>,
    pub max_projection_defect: f64,
    pub worst_decay_ratio: f64,
    pub worst_stable_ratio: f64,
    pub worst_unstable_ratio: f64,
    pub samples: usize,
    pub decay_checks: usize,
    pub projection_lipschitz: Option<f64>,
    pub witnesses: Witnesses,
    pub notes: Vec<String>,
    pub pass: bool,
}

fn bump(slot: &mut f64, wit: &mut Option<Witness>, value: f64, make: impl FnOnce() -> Witness) {
    if value > *slot || (value.is_nan() && !slot.is_nan()) {
        *slot = value;
        let mut w = make();
        w.value = value;
        *wit = Some(w);
    }
}

fn take_max(a: (f64, Option<Witness>), b: (f64, Option<Witness>)) -> (f64, Option<Witness>) {
    if b.0 > a.0 || (b.0.is_nan() && !a.0.is_nan()) {
        b
    } else {
        a
    }
}

impl VerificationReport {
    fn empty(c: f64, lambda: f64, opts: &VerifyOptions) -> Self {
        VerificationReport {
            c,
            lambda,
            tol: opts.tol,
            decay_tol: opts.decay_tol,
            max_proj_norm: 0.0,
            max_inclusion_residual: 0.0,
            max_reverse_residual: None,
            max_projection_defect: 0.0,
            worst_decay_ratio: 0.0,
            worst_stable_ratio: 0.0,
            worst_unstable_ratio: 0.0,
            samples: 0,
            decay_checks: 0,
            projection_lipschitz: None,
            witnesses: Witnesses::default(),
            notes: Vec::new(),
            pass: false,
        }
    }

    fn finalize(&mut self) {
        self.worst_decay_ratio = self.worst_stable_ratio.max(self.worst_unstable_ratio);
        self.pass = self.max_proj_norm <= self.c * (1.0 + self.tol)
            && self.max_inclusion_residual <= self.tol
            && self.max_projection_defect <= self.tol
            && self.worst_decay_ratio <= 1.0 + self.decay_tol;
    }

    /// Combines reports over disjoint samples with the same constants.
    pub fn merge(self, other: VerificationReport) -> Result<VerificationReport> {
        if self.c != other.c || self.lambda != other.lambda || self.tol != other.tol || self.decay_tol != other.decay_tol
        {
            return Err(Error::InvalidInput("cannot merge reports with different constants".into()));
        }
        let mut r = VerificationReport::empty(self.c, self.lambda, &VerifyOptions {
            tol: self.tol,
            decay_tol: self.decay_tol,
            ..VerifyOptions::default()
        });
        (r.max_proj_norm, r.witnesses.proj) =
            take_max((self.max_proj_norm, self.witnesses.proj), (other.max_proj_norm, other.witnesses.proj));
        (r.max_inclusion_residual, r.witnesses.inclusion) = take_max(
            (self.max_inclusion_residual, self.witnesses.inclusion),
            (other.max_inclusion_residual, other.witnesses.inclusion),
        );
        (r.max_projection_defect, r.witnesses.defect) = take_max(
            (self.max_projection_defect, self.witnesses.defect),
            (other.max_projection_defect, other.witnesses.defect),
        );
        let (sd, ud) = (self.worst_decay_ratio, other.worst_decay_ratio);
        (r.worst_decay_ratio, r.witnesses.decay) = take_max((sd, self.witnesses.decay), (ud, other.witnesses.decay));
        r.worst_stable_ratio = self.worst_stable_ratio.max(other.worst_stable_ratio);
        r.worst_unstable_ratio = self.worst_unstable_ratio.max(other.worst_unstable_ratio);
        r.max_reverse_residual = match (self.max_reverse_residual, other.max_reverse_residual) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        r.projection_lipschitz = match (self.projection_lipschitz, other.projection_lipschitz) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        r.samples = self.samples + other.samples;
        r.decay_checks = self.decay_checks + other.decay_checks;
        r.notes = self.notes;
        r.notes.extend(other.notes);
        r.finalize();
        Ok(r)
    }
}

fn sample_rng(opts: &VerifyOptions, sample: usize, side: u64) -> ChaCha8Rng {
    let s = opts.seed ^ (sample as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ side.wrapping_mul(0xD1B5_4A32_D192_ED03);
    ChaCha8Rng::seed_from_u64(s)
}

fn column_norm(m: &Mat, j: usize, p: NormExp) -> f64 {
    let n = m.nrows();
    p.norm(&m.as_slice()[j * n..(j + 1) * n])
}

/// Unit directions inside the range of `proj`: random ones plus the images of coordinate vectors.
fn direction_block(proj: &LinOp, p: NormExp, opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Mat {
    let n = proj.domain().len();
    let mut cols: Vec<Mat> = Vec::new();
    if opts.n_dirs > 0 {
        let raw = Mat::from_fn(n, opts.n_dirs, |_, _| rng.gen_range(-1.0..1.0));
        cols.push(proj.apply_mat(&raw));
    }
    if opts.coordinate_dirs {
        cols.push(proj.apply_mat(&Mat::identity(n, n)));
    }
    let mut kept: Vec<f64> = Vec::new();
    let mut count = 0;
    for block in &cols {
        for j in 0..block.ncols() {
            let nrm = column_norm(block, j, p);
            if nrm > 1e-12 && nrm.is_finite() {
                kept.extend(block.as_slice()[j * n..(j + 1) * n].iter().map(|x| x / nrm));
                count += 1;
            }
        }
    }
    // a second pass removes what cancellation left behind in short projected columns
    let mut out = proj.apply_mat(&Mat::from_vec(n, count, kept));
    for j in 0..out.ncols() {
        let nrm = column_norm(&out, j, p);
        out.column_mut(j).scale_mut(1.0 / nrm);
    }
    out
}

fn column_vec(m: &Mat, j: usize, w: Window, p: NormExp) -> SeqVec {
    let n = m.nrows();
    SeqVec::from_fn(w, p, |i| m.as_slice()[j * n + w.pos(i).unwrap_or(0)])
}

/// Largest `‖block_j‖ / scale` with its column.
fn worst_column(block: &Mat, p: NormExp, scale: f64) -> (f64, usize) {
    let mut best = (0.0, 0);
    for j in 0..block.ncols() {
        let r = column_norm(block, j, p) / scale;
        if r > best.0 || r.is_nan() {
            best = (r, j);
        }
    }
    best
}

fn check_pair(rep: &mut VerificationReport, pair: &ProjPair, p: NormExp, mk: &dyn Fn(&str) -> Witness) -> Result<()> {
    bump(&mut rep.max_proj_norm, &mut rep.witnesses.proj, pair.max_norm(p), || mk("projection_norm"));
    let d = pair.defects()?.max();
    bump(&mut rep.max_projection_defect, &mut rep.witnesses.defect, d, || mk("projection_defect"));
    Ok(())
}

/// Checks the structure along orbits of a cocycle `(α, A)` through the given points.
pub fn verify_cocycle_cl(
    coc: &dyn Cocycle,
    cert: &CLCertificate,
    points: &[SeqVec],
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    if opts.horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let p = opts.p.unwrap_or_else(|| coc.p());
    let w = coc.window();
    let mut rep = VerificationReport::empty(cert.c, cert.lambda, opts);
    let mut prev: Option<(SeqVec, ProjPair)> = None;
    let mut lip: Option<f64> = None;
    let mut skipped = 0usize;
    for (i, x) in points.iter().enumerate() {
        x.check_window(w)?;
        let sample = opts.first_sample + i;
        let pair = cert
            .split
            .at_point(x)
            .ok_or_else(|| Error::Certificate(format!("no projection at sample {sample}")))?;
        let mk = |check: &str| Witness {
            check: check.into(),
            sample,
            index: None,
            point: Some(x.clone()),
            direction: None,
            n: 0,
            value: 0.0,
        };
        check_pair(&mut rep, &pair, p, &mk)?;

        // invariance of both families
        let fx = coc.step(x)?;
        if let Some(next) = cert.split.at_point(&fx) {
            let r = next.q.compose(&coc.op(x)?)?.compose(&pair.p)?.op_norm(p);
            bump(&mut rep.max_inclusion_residual, &mut rep.witnesses.inclusion, r, || mk("stable_inclusion"));
        } else {
            skipped += 1;
        }
        let bx = coc.step_back(x)?;
        if let Some(before) = cert.split.at_point(&bx) {
            let r = before.p.compose(&coc.op_back(x)?)?.compose(&pair.q)?.op_norm(p);
            bump(&mut rep.max_inclusion_residual, &mut rep.witnesses.inclusion, r, || mk("unstable_inclusion"));
        } else {
            skipped += 1;
        }

        // decay
        for (side, proj) in [(0u64, &pair.p), (1u64, &pair.q)] {
            let mut rng = sample_rng(opts, sample, side);
            let dirs = direction_block(proj, p, opts, &mut rng);
            if dirs.ncols() == 0 {
                continue;
            }
            let mut block = dirs.clone();
            let mut cur = x.clone();
            for n in 1..=opts.horizon {
                let a = if side == 0 { coc.op(&cur)? } else { coc.op_back(&cur)? };
                block = a.apply_mat(&block);
                cur = if side == 0 { coc.step(&cur)? } else { coc.step_back(&cur)? };
                if coc.couples_coordinates() {
                    truncation_guard(&cur, if side == 0 { n as i64 } else { -(n as i64) })?;
                }
                let scale = cert.c * libm::pow(cert.lambda, n as f64);
                let (r, j) = worst_column(&block, p, scale);
                rep.decay_checks += block.ncols();
                let slot = if side == 0 { &mut rep.worst_stable_ratio } else { &mut rep.worst_unstable_ratio };
                if r > *slot {
                    *slot = r;
                }
                bump(&mut rep.worst_decay_ratio, &mut rep.witnesses.decay, r, || Witness {
                    direction: Some(column_vec(&dirs, j, w, p)),
                    n,
                    ..mk(if side == 0 { "stable_decay" } else { "unstable_decay" })
                });
                if opts.stop_outside_cert && cert.split.at_point(&cur).is_none() {
                    break;
                }
            }
        }

        if let Some((y, q)) = &prev {
            let d = x.dist(y)?;
            if d > 0.0 {
                let l = pair.p.sub(&q.p)?.op_norm(p) / d;
                lip = Some(lip.map_or(l, |m: f64| m.max(l)));
            }
        }
        prev = Some((x.clone(), pair));
        rep.samples += 1;
    }
    if skipped > 0 {
        rep.notes.push(format!("{skipped} inclusion checks skipped: neighbour outside certificate"));
    }
    rep.projection_lipschitz = lip;
    rep.finalize();
    Ok(rep)
}

/// `(f, Df)` case of [`verify_cocycle_cl`].
pub fn verify_cl_diffeo(
    sys: &dyn Diffeo,
    cert: &CLCertificate,
    points: &[SeqVec],
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    verify_cocycle_cl(&DiffeoCocycle(sys), cert, points, opts)
}

/// Checks the structure of an operator sequence with index-based projections.
///
/// With `period = Some(m)` the projections and operators must also repeat with period `m`.
pub fn verify_cl_opseq(
    seq: &OperatorSeq,
    cert: &CLCertificate,
    opts: &VerifyOptions,
    period: Option<usize>,
) -> Result<VerificationReport> {
    if opts.horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let p = opts.p.unwrap_or(NormExp::Two);
    let (a, b) = seq.interval();
    let pairs = cert.index_pairs(a, b)?;
    let pair = |k: i64| &pairs[(k - a) as usize];
    let mut rep = VerificationReport::empty(cert.c, cert.lambda, opts);
    let mk = |check: &str, k: i64| Witness {
        check: check.into(),
        sample: opts.first_sample + (k - a) as usize,
        index: Some(k),
        point: None,
        direction: None,
        n: 0,
        value: 0.0,
    };
    for k in a..=b {
        if pair(k).window() != seq.window_at(k)? {
            return Err(Error::WindowMismatch { expected: seq.window_at(k)?, found: pair(k).window() });
        }
        check_pair(&mut rep, pair(k), p, &|c: &str| mk(c, k))?;
        rep.samples += 1;
    }
    let invs: Vec<LinOp> = (a..b).map(|k| seq.inv(k).map(|c| c.into_owned())).collect::<Result<_>>()?;
    for k in a..b {
        let op = seq.op(k)?;
        let r = pair(k + 1).q.compose(op)?.compose(&pair(k).p)?.op_norm(p);
        bump(&mut rep.max_inclusion_residual, &mut rep.witnesses.inclusion, r, || mk("stable_inclusion", k));
        let r = pair(k).p.compose(&invs[(k - a) as usize])?.compose(&pair(k + 1).q)?.op_norm(p);
        bump(&mut rep.max_inclusion_residual, &mut rep.witnesses.inclusion, r, || mk("unstable_inclusion", k + 1));
    }
    let h = opts.horizon as i64;
    for k in a..=b {
        for side in [0u64, 1] {
            let proj = if side == 0 { &pair(k).p } else { &pair(k).q };
            let steps: Vec<i64> = if side == 0 { (k..(k + h).min(b)).collect() } else { ((k - h).max(a)..k).rev().collect() };
            if steps.is_empty() {
                continue;
            }
            let mut rng = sample_rng(opts, opts.first_sample + (k - a) as usize, side);
            let dirs = direction_block(proj, p, opts, &mut rng);
            if dirs.ncols() == 0 {
                continue;
            }
            let mut block = dirs.clone();
            for (n, j) in steps.into_iter().enumerate() {
                let n = n + 1;
                let op = if side == 0 { seq.op(j)? } else { &invs[(j - a) as usize] };
                block = op.apply_mat(&block);
                let scale = cert.c * libm::pow(cert.lambda, n as f64);
                let (r, col) = worst_column(&block, p, scale);
                rep.decay_checks += block.ncols();
                let slot = if side == 0 { &mut rep.worst_stable_ratio } else { &mut rep.worst_unstable_ratio };
                if r > *slot {
                    *slot = r;
                }
                bump(&mut rep.worst_decay_ratio, &mut rep.witnesses.decay, r, || Witness {
                    direction: Some(column_vec(&dirs, col, proj.domain(), p)),
                    n,
                    ..mk(if side == 0 { "stable_decay" } else { "unstable_decay" }, k)
                });
            }
        }
    }
    if let Some(m) = period {
        let m = m as i64;
        if m == 0 {
            return Err(Error::InvalidInput("period must be positive".into()));
        }
        let mut worst = 0.0f64;
        for k in a..=b - m {
            worst = worst.max(pair(k + m).p.max_abs_diff(&pair(k).p)?);
            if k + m < b {
                worst = worst.max(seq.op(k + m)?.max_abs_diff(seq.op(k)?)?);
            }
        }
        if worst > 0.0 {
            rep.notes.push(format!("periodicity defect {worst:e}"));
        }
        bump(&mut rep.max_projection_defect, &mut rep.witnesses.defect, worst, || mk("periodicity", a));
    }
    rep.finalize();
    Ok(rep)
}

/// Half-line or full line for dichotomy checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
    Full,
}

/// As [`verify_cl_opseq`] on the chosen side, with invariance required in both directions.
pub fn verify_dichotomy(
    seq: &OperatorSeq,
    cert: &CLCertificate,
    side: Side,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let (a, b) = seq.interval();
    let (lo, hi) = match side {
        Side::Plus => (a.max(0), b),
        Side::Minus => (a, b.min(0)),
        Side::Full => (a, b),
    };
    if hi <= lo {
        return Err(Error::InvalidInput(format!("interval [{a}, {b}] has no {side:?} part")));
    }
    let sub = if (lo, hi) == (a, b) { seq.clone() } else { seq.restrict(lo, hi)? };
    let mut rep = verify_cl_opseq(&sub, cert, opts, None)?;
    let p = opts.p.unwrap_or(NormExp::Two);
    let mut worst = 0.0f64;
    for k in lo..hi {
        let (pk, pk1) = (
            cert.split.at_index(k).ok_or_else(|| Error::Certificate(format!("no projection at {k}")))?,
            cert.split.at_index(k + 1).ok_or_else(|| Error::Certificate(format!("no projection at {}", k + 1)))?,
        );
        let r = pk1.p.compose(sub.op(k)?)?.compose(&pk.q)?.op_norm(p);
        if r > worst {
            worst = r;
        }
        bump(&mut rep.max_inclusion_residual, &mut rep.witnesses.inclusion, r, || Witness {
            check: "reverse_inclusion".into(),
            sample: opts.first_sample + (k - lo) as usize,
            index: Some(k),
            point: None,
            direction: None,
            n: 0,
            value: 0.0,
        });
    }
    rep.max_reverse_residual = Some(worst);
    rep.finalize();
    Ok(rep)
}

/// `‖Φ(k, l) e_m‖`: growth of a unit coordinate vector under the cocycle.
pub fn unit_growth(seq: &OperatorSeq, k: i64, l: i64, m: i64, p: NormExp) -> Result<f64> {
    let e = SeqVec::unit(seq.window_at(l)?, m, p);
    Ok(seq.cocycle_apply(k, l, &e)?.norm())
}
