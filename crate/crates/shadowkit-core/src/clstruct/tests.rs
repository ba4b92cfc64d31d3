use super::*;
use crate::seqcore::{LinOp, NormExp, OperatorSeq, SeqVec, Window};
use crate::systems::{
    conjugate, make_linear_example_seq, make_ms_product, random_point, CoordSine, Diffeo, MsParams, WeightedShift,
};
use alloc::sync::Arc;
use alloc::vec::Vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pts(w: Window, p: NormExp, n: usize, radius: i64, amp: f64, seed: u64) -> Vec<SeqVec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_point(w, p, radius, amp, &mut rng)).collect()
}

fn opts(h: usize) -> VerifyOptions {
    VerifyOptions { horizon: h, ..VerifyOptions::default() }
}

#[test]
fn coordinate_pairs_are_exact() {
    let w = Window::symmetric(6);
    let pair = ProjPair::coordinates(w, |i| i >= 2);
    assert_eq!(pair.defects().unwrap().max(), 0.0);
    let sw = pair.swapped();
    assert_eq!(sw.p, pair.q);
    let dense = ProjPair::from_p(LinOp::dense(w, w, pair.p.to_dense()).unwrap()).unwrap();
    assert!(dense.defects().unwrap().max() < 1e-15);
}

#[test]
fn linear_shift_passes_with_unit_constant() {
    let w = Window::symmetric(30);
    for p in [NormExp::Two, NormExp::Inf, NormExp::One] {
        let f = WeightedShift::linear(w, p);
        let cert = shift_certificate(&f, 0).unwrap();
        assert_eq!((cert.c, cert.lambda), (1.0, 0.5));
        let rep = verify_cl_diffeo(&f, &cert, &pts(w, p, 6, 5, 1.0, 1), &opts(20)).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.worst_decay_ratio <= 1.0 + 1e-12);
        assert_eq!(rep.max_inclusion_residual, 0.0);
        assert_eq!(rep.samples, 6);
    }
}

#[test]
fn shifted_threshold_needs_the_larger_constant() {
    let w = Window::symmetric(30);
    let f = WeightedShift::linear(w, NormExp::Two);
    let points = pts(w, NormExp::Two, 3, 4, 1.0, 2);
    for n in -3i64..=3 {
        let cert = shift_certificate(&f, n).unwrap();
        let rep = verify_cl_diffeo(&f, &cert, &points, &opts(12)).unwrap();
        assert!(rep.pass, "threshold {n}: {rep:?}");
        // measured sup of |Df^n v| / λ^n, worked out by hand: 4^{n-1} above zero, 4^{|n|} below
        let needed = if n >= 1 { libm::pow(4.0, (n - 1) as f64) } else { libm::pow(4.0, n.unsigned_abs() as f64) };
        let measured = (rep.worst_decay_ratio * cert.c).max(1.0);
        assert!((measured - needed).abs() <= 1e-9 * needed, "threshold {n}: {measured} vs {needed}");
        let small = cert.with_constants(libm::pow(2.5, n.unsigned_abs() as f64), 0.5).unwrap();
        let rep = verify_cl_diffeo(&f, &small, &points, &opts(12)).unwrap();
        assert_eq!(rep.pass, (0..=2).contains(&n), "threshold {n}");
    }
}

#[test]
fn swapped_certificate_fails_geometrically() {
    let w = Window::symmetric(30);
    let f = WeightedShift::linear(w, NormExp::Two);
    let cert = swapped_certificate(&shift_certificate(&f, 0).unwrap());
    let rep = verify_cl_diffeo(&f, &cert, &pts(w, NormExp::Two, 2, 3, 1.0, 3), &opts(10)).unwrap();
    assert!(!rep.pass);
    // (2/λ)^n at the horizon
    assert!((rep.worst_decay_ratio - libm::pow(4.0, 10.0)).abs() < 1e-6);
    let wit = rep.witnesses.decay.unwrap();
    assert_eq!(wit.n, 10);
    assert!(wit.direction.is_some());
}

#[test]
fn no_ed_example_is_cl_but_not_ed() {
    let w = Window::symmetric(24);
    let seq = make_linear_example_seq(w, (-10, 10)).unwrap();
    let cert = no_ed_certificate(w).unwrap();
    let rep = verify_cl_opseq(&seq, &cert, &opts(20), None).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!(rep.worst_decay_ratio <= 1.0 + 1e-12);
    let ed = verify_dichotomy(&seq, &cert, Side::Plus, &opts(20)).unwrap();
    assert!(!ed.pass);
    assert!((ed.max_reverse_residual.unwrap() - 2.0).abs() < 1e-12);
    let wide = make_linear_example_seq(w, (-21, 1)).unwrap();
    for m in -20i64..=-1 {
        // a stable vector at 0 pulled back to time m
        let g = unit_growth(&wide, m, 0, m, NormExp::Two).unwrap();
        assert_eq!(g, libm::pow(2.0, -m as f64));
        let fwd = unit_growth(&wide, 0, m, m, NormExp::Two).unwrap();
        assert_eq!(fwd, libm::pow(2.0, m as f64));
    }
}

fn hyperbolic_diag(w: Window) -> LinOp {
    LinOp::diag_fn(w, |i| if i >= 0 { 0.5 } else { 2.0 }).unwrap()
}

#[test]
fn constant_hyperbolic_diagonal_is_a_dichotomy() {
    let w = Window::symmetric(8);
    let a = hyperbolic_diag(w);
    let seq = OperatorSeq::new(-6, alloc::vec![a.clone(); 12]).unwrap();
    let cert = hyperbolic_diag_certificate(&a).unwrap();
    assert_eq!((cert.c, cert.lambda), (1.0, 0.5));
    assert!(verify_cl_opseq(&seq, &cert, &opts(12), None).unwrap().pass);
    for side in [Side::Plus, Side::Minus, Side::Full] {
        let rep = verify_dichotomy(&seq, &cert, side, &opts(12)).unwrap();
        assert!(rep.pass, "{side:?}");
        assert_eq!(rep.max_reverse_residual, Some(0.0));
    }
}

#[test]
fn shift_on_negative_side_with_everything_stable_fails() {
    let w = Window::symmetric(20);
    let f = WeightedShift::linear(w, NormExp::Two);
    let zero = SeqVec::zeros(w, NormExp::Two);
    let df = f.dforward(&zero).unwrap();
    let seq = OperatorSeq::new(-12, alloc::vec![df; 12]).unwrap();
    let all = CLCertificate::new(1.0, 0.5, 2.5, Arc::new(Uniform(ProjPair::coordinates(w, |_| true)))).unwrap();
    let rep = verify_dichotomy(&seq, &all, Side::Minus, &opts(12)).unwrap();
    assert!(!rep.pass);
    assert!(rep.worst_stable_ratio > 1e3);
}

#[test]
fn periodic_certificate_is_checked() {
    let w = Window::symmetric(5);
    let a0 = LinOp::diag_fn(w, |i| if i >= 0 { 0.5 } else { 2.0 }).unwrap();
    let a1 = LinOp::diag_fn(w, |i| if i >= 0 { 0.25 } else { 3.0 }).unwrap();
    let ops: Vec<LinOp> = (0..12).map(|k| if k % 2 == 0 { a0.clone() } else { a1.clone() }).collect();
    let seq = OperatorSeq::new(0, ops).unwrap();
    let pair = ProjPair::coordinates(w, |i| i >= 0);
    let fam = IndexFamily::periodic(0, alloc::vec![pair.clone(), pair]).unwrap();
    let cert = CLCertificate::new(1.0, 0.5, 4.0, Arc::new(fam)).unwrap();
    assert!(verify_cl_opseq(&seq, &cert, &opts(8), Some(2)).unwrap().pass);
    let rep = verify_cl_opseq(&seq, &cert, &opts(8), Some(3)).unwrap();
    assert!(!rep.pass);
    assert_eq!(rep.max_projection_defect, 1.0);
}

#[test]
fn ms_product_certificate() {
    let w = Window::symmetric(12);
    for p in [NormExp::Inf, NormExp::Two] {
        let f = make_ms_product(MsParams::default(), w, p).unwrap();
        let (cert, info) = ms_certificate(&f, 60).unwrap();
        assert_eq!(info.n0, 0);
        assert_eq!(cert.c, 1.0);
        assert!(info.c_empirical < 1.0);
        let rep = verify_cl_diffeo(&f, &cert, &pts(w, p, 8, 6, 2.0, 4), &opts(30)).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.projection_lipschitz.is_some());
    }
}

#[test]
fn cocycles_over_other_bases() {
    let w = Window::symmetric(30);
    let f = WeightedShift::tanh(w, NormExp::Two);
    let cert = shift_certificate(&f, 0).unwrap();
    let points = pts(w, NormExp::Two, 4, 4, 1.0, 5);
    assert!(verify_cocycle_cl(&DiffeoCocycle(&f), &cert, &points, &opts(15)).unwrap().pass);
    let a = hyperbolic_diag(w);
    let hc = hyperbolic_diag_certificate(&a).unwrap();
    let coc = ConstantCocycle::new(&f, a).unwrap();
    assert!(verify_cocycle_cl(&coc, &hc, &points, &opts(15)).unwrap().pass);
}

#[test]
fn transported_certificate_passes() {
    let w = Window::symmetric(30);
    let p = NormExp::Two;
    let base = WeightedShift::tanh(w, p);
    let cert = shift_certificate(&base, 0).unwrap();
    let h = Arc::new(CoordSine::new(w, p, 0.05).unwrap());
    let g = conjugate(Arc::new(base), h.clone()).unwrap();
    let tc = transported_certificate(&cert, h, g.r1(), g.deriv_bound()).unwrap();
    assert!((tc.c - 1.0 / (0.95f64 * 0.95)).abs() < 1e-12);
    let rep = verify_cl_diffeo(&g, &tc, &pts(w, p, 4, 4, 1.0, 6), &opts(15)).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!(rep.max_inclusion_residual < 1e-12);
}

#[test]
fn split_runs_merge_to_the_whole() {
    let w = Window::symmetric(30);
    let f = WeightedShift::tanh(w, NormExp::Inf);
    let cert = swapped_certificate(&shift_certificate(&f, 1).unwrap());
    let points = pts(w, NormExp::Inf, 6, 4, 1.0, 7);
    let whole = verify_cl_diffeo(&f, &cert, &points, &opts(8)).unwrap();
    let parts: Vec<VerificationReport> = points
        .chunks(2)
        .enumerate()
        .map(|(i, c)| {
            verify_cl_diffeo(&f, &cert, c, &VerifyOptions { first_sample: 2 * i, ..opts(8) }).unwrap()
        })
        .collect();
    let left = parts[0].clone().merge(parts[1].clone()).unwrap().merge(parts[2].clone()).unwrap();
    let right = parts[0].clone().merge(parts[1].clone().merge(parts[2].clone()).unwrap()).unwrap();
    for r in [&left, &right] {
        assert_eq!(r.worst_decay_ratio, whole.worst_decay_ratio);
        assert_eq!(r.max_proj_norm, whole.max_proj_norm);
        assert_eq!(r.samples, whole.samples);
        assert_eq!(r.witnesses.decay, whole.witnesses.decay);
        assert_eq!(r.pass, whole.pass);
    }
}

#[test]
fn report_serializes_with_witnesses() {
    let w = Window::symmetric(10);
    let f = WeightedShift::linear(w, NormExp::Two);
    let cert = swapped_certificate(&shift_certificate(&f, 0).unwrap());
    let rep = verify_cl_diffeo(&f, &cert, &pts(w, NormExp::Two, 1, 2, 1.0, 8), &opts(3)).unwrap();
    let s = serde_json::to_string(&rep).unwrap();
    assert!(s.contains("\"decay\":{\"check\""));
    let back: VerificationReport = serde_json::from_str(&s).unwrap();
    assert_eq!(back, rep);
}

#[test]
fn bad_inputs_are_rejected() {
    let w = Window::symmetric(10);
    let f = WeightedShift::linear(w, NormExp::Two);
    let cert = shift_certificate(&f, 0).unwrap();
    assert!(verify_cl_diffeo(&f, &cert, &pts(w, NormExp::Two, 1, 2, 1.0, 9), &opts(0)).is_err());
    let other = SeqVec::zeros(Window::symmetric(4), NormExp::Two);
    assert!(verify_cl_diffeo(&f, &cert, &[other], &opts(2)).is_err());
    assert!(CLCertificate::new(0.5, 0.5, 1.0, cert.split.clone()).is_err());
    // orbit leaving the window trips the guard
    let wide = SeqVec::from_fn(w, NormExp::Two, |i| if i > 5 { 1.0 } else { 0.0 });
    assert!(matches!(
        verify_cl_diffeo(&f, &cert, &[wide], &opts(10)),
        Err(crate::Error::Truncation { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn diagonal_sequences_satisfy_the_literal_bound(
        seed in 0u64..1000,
        stable in proptest::collection::vec(0.05f64..0.6, 6),
        unstable in proptest::collection::vec(1.7f64..6.0, 6),
    ) {
        let w = Window::new(0, 5).unwrap();
        let lambda = stable.iter().cloned().fold(0.0, f64::max).max(unstable.iter().map(|u| 1.0 / u).fold(0.0, f64::max));
        let ops: Vec<LinOp> = (0..10)
            .map(|k| LinOp::diag_fn(w, |i| {
                let j = ((i + k + seed as i64) % 6) as usize;
                if i < 3 { stable[j] } else { unstable[j] }
            }).unwrap())
            .collect();
        let seq = OperatorSeq::new(0, ops).unwrap();
        let cert = diagonal_certificate(w, |i| i < 3, lambda, 6.0).unwrap();
        let rep = verify_cl_opseq(&seq, &cert, &VerifyOptions { seed, ..opts(10) }, None).unwrap();
        prop_assert!(rep.pass);
        for k in 0..10i64 {
            for n in 1..=(10 - k) {
                let v = SeqVec::from_fn(w, NormExp::Two, |i| if i < 3 { 1.0 + i as f64 } else { 0.0 });
                let out = seq.cocycle_apply(k + n, k, &v).unwrap();
                prop_assert!(out.norm() <= cert.c * libm::pow(lambda, n as f64) * v.norm() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn dense_pairs_from_p_are_complementary(
        entries in proptest::collection::vec(-1.0f64..1.0, 16),
    ) {
        // oblique projection S diag(1,1,0,0) S^{-1}
        let w = Window::new(0, 3).unwrap();
        let s = crate::seqcore::Mat::from_vec(4, 4, entries) + crate::seqcore::Mat::identity(4, 4) * 3.0;
        let si = s.clone().try_inverse().unwrap();
        let d = crate::seqcore::Mat::from_diagonal(&nalgebra::DVector::from_vec(alloc::vec![1.0, 1.0, 0.0, 0.0]));
        let pair = ProjPair::from_p(LinOp::dense(w, w, &s * d * si).unwrap()).unwrap();
        let def = pair.defects().unwrap();
        prop_assert!(def.complement < 1e-12);
        prop_assert!(def.idempotence_p < 1e-10 && def.idempotence_q < 1e-10);
    }
}
