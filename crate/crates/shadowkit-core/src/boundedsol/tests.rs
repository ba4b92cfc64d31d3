use super::*;
use crate::clstruct::{diagonal_certificate, verify_cl_opseq, IndexFamily, VerifyOptions};
use crate::seqcore::{LinOp, Mat, NormExp, OperatorSeq, SeqVec, Window};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA: f64 = 0.5;

fn scaled(m: Mat, target: f64) -> Mat {
    let n = m.clone().svd(false, false).singular_values.max();
    m * (target / n)
}

/// Block-diagonal hyperbolic operator: stable block of norm ≤ λ, unstable block with inverse of norm ≤ λ.
fn hyperbolic_op(w: Window, split: usize, rng: &mut ChaCha8Rng) -> LinOp {
    let n = w.len();
    let mut m = Mat::zeros(n, n);
    let rnd = |r: usize, rng: &mut ChaCha8Rng| Mat::from_fn(r, r, |_, _| rng.gen_range(-1.0..1.0));
    let s = scaled(rnd(split, rng), LAMBDA * rng.gen_range(0.3..0.95));
    let u = n - split;
    let near = Mat::identity(u, u) * 0.6 + scaled(rnd(u, rng), 0.4);
    let inv_u = (near * (LAMBDA * 0.9)).try_inverse().unwrap();
    m.view_mut((0, 0), (split, split)).copy_from(&s);
    m.view_mut((split, split), (u, u)).copy_from(&inv_u);
    LinOp::dense(w, w, m).unwrap()
}

struct Instance {
    prob: InhomProblem,
    pairs: Vec<ProjPair>,
    cert: crate::clstruct::CLCertificate,
}

fn instance(dim: usize, split: usize, a: i64, len: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Window::new(0, dim as i64 - 1).unwrap();
    let ops: Vec<LinOp> = (0..len).map(|_| hyperbolic_op(w, split, &mut rng)).collect();
    let seq = OperatorSeq::new(a, ops).unwrap();
    let forcing: Vec<SeqVec> =
        (0..len).map(|_| SeqVec::from_fn(w, NormExp::Two, |_| rng.gen_range(-1.0..1.0))).collect();
    let prob = InhomProblem::new(seq, forcing).unwrap();
    let cert = diagonal_certificate(w, |i| i < split as i64, LAMBDA, 4.0).unwrap();
    let pairs = cert.index_pairs(a, a + len as i64).unwrap();
    Instance { prob, pairs, cert }
}

fn direct(inst: &Instance) -> BoundedSolution {
    banded_direct_solve(&inst.prob, &inst.pairs[0], inst.pairs.last().unwrap()).unwrap()
}

#[test]
fn zero_forcing_gives_zero() {
    let inst = instance(4, 2, -3, 8, 1);
    let prob = InhomProblem::homogeneous(inst.prob.seq().clone(), NormExp::Two).unwrap();
    let sol = perron_solve(&prob, &inst.cert).unwrap();
    assert_eq!(sol.sup_norm, 0.0);
    assert_eq!(direct(&Instance { prob, ..inst }).sup_norm, 0.0);
}

#[test]
fn constant_diagonal_bound() {
    let w = Window::new(0, 1).unwrap();
    let a = LinOp::diag(w, vec![0.5, 2.0]).unwrap();
    let cert = diagonal_certificate(w, |i| i == 0, 0.5, 2.0).unwrap();
    assert_eq!(cert.l_const(), 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for p in [NormExp::Inf, NormExp::Two, NormExp::One] {
        let forcing: Vec<SeqVec> = (0..40)
            .map(|_| {
                let v = SeqVec::from_fn(w, p, |_| rng.gen_range(-1.0..1.0));
                let n = v.norm();
                v.scale(1.0 / n)
            })
            .collect();
        let prob = InhomProblem::new(OperatorSeq::new(-20, vec![a.clone(); 40]).unwrap(), forcing).unwrap();
        let sol = perron_solve(&prob, &cert).unwrap();
        assert!(sol.sup_norm <= 3.0 * prob.w_bound());
        assert!(sol.residual_ok());
    }
    // constant forcing on the stable coordinate saturates towards the geometric sum 2
    let e = SeqVec::unit(w, 0, NormExp::Inf);
    let prob = InhomProblem::new(OperatorSeq::new(0, vec![a; 60]).unwrap(), vec![e; 60]).unwrap();
    let sol = perron_solve(&prob, &cert).unwrap();
    assert!((sol.sup_norm - 2.0).abs() < 1e-15);
}

#[test]
fn hand_example_two_dimensional() {
    // v_k = sum_{1 ≤ i ≤ k} 2^{i-k} e_1 = 2 - 2^{1-k}
    let w = Window::new(0, 1).unwrap();
    let a = LinOp::dense(w, w, Mat::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 2.0])).unwrap();
    let e = SeqVec::unit(w, 0, NormExp::Two);
    let prob = InhomProblem::new(OperatorSeq::new(0, vec![a; 6]).unwrap(), vec![e; 6]).unwrap();
    let pair = ProjPair::coordinates(w, |i| i == 0);
    let sol = banded_direct_solve(&prob, &pair, &pair).unwrap();
    let per = perron_solve_with(&prob, &vec![pair; 7]).unwrap();
    for k in 0..=6i64 {
        let exact = 2.0 - libm::pow(2.0, (1 - k) as f64);
        assert!((sol.at(k).get(0) - exact).abs() < 1e-12);
        assert!(sol.at(k).get(1).abs() < 1e-12);
        assert!((per.at(k).get(0) - exact).abs() < 1e-15);
    }
}

#[test]
fn sweeps_match_the_literal_sums() {
    let inst = instance(4, 2, -5, 12, 3);
    let sol = perron_solve_with(&inst.prob, &inst.pairs).unwrap();
    for k in -5..=7 {
        let lit = perron_sum_at(&inst.prob, &inst.pairs, k).unwrap();
        assert!(lit.dist(sol.at(k)).unwrap() < 1e-12);
    }
}

#[test]
fn four_dimensional_oracle_agreement() {
    let inst = instance(4, 2, 0, 12, 4);
    assert!(verify_cl_opseq(inst.prob.seq(), &inst.cert, &VerifyOptions::default(), None).unwrap().pass);
    let sol = perron_solve(&inst.prob, &inst.cert).unwrap();
    assert!(sol.max_abs_diff(&direct(&inst)).unwrap() <= 1e-9);
    assert!(sol.residual_ok());
}

#[test]
fn direct_solve_respects_cap() {
    let w = Window::symmetric(100);
    let seq = OperatorSeq::new(0, vec![LinOp::scalar(w, 0.5); 100]).unwrap();
    let prob = InhomProblem::homogeneous(seq, NormExp::Two).unwrap();
    let pair = ProjPair::coordinates(w, |_| true);
    assert!(matches!(banded_direct_solve(&prob, &pair, &pair), Err(crate::Error::SizeCap { .. })));
}

#[test]
fn periodic_scalar_period_matches_fixed_point() {
    let w = Window::new(0, 1).unwrap();
    let a = LinOp::diag(w, vec![0.5, 2.0]).unwrap();
    let c = SeqVec::from_coeffs(w, vec![0.7, -0.4], NormExp::Two).unwrap();
    let cert = diagonal_certificate(w, |i| i == 0, 0.5, 2.0).unwrap();
    let prob = PeriodicProblem::new(vec![a.clone()], vec![c.clone()]).unwrap();
    let sol = periodic_green_solve(&prob, &cert).unwrap();
    let exact = (Mat::identity(2, 2) - a.to_dense()).try_inverse().unwrap() * nalgebra::DVector::from_vec(vec![0.7, -0.4]);
    assert!((sol.v[0].get(0) - exact[0]).abs() < 1e-12);
    assert!((sol.v[0].get(1) - exact[1]).abs() < 1e-12);
    assert!(sol.sup_norm <= 3.0 * c.norm());
    let zero = PeriodicProblem::new(vec![a], vec![SeqVec::zeros(w, NormExp::Two)]).unwrap();
    assert_eq!(periodic_green_solve(&zero, &cert).unwrap().sup_norm, 0.0);
}

#[test]
fn periodic_three_phase() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w = Window::new(0, 4).unwrap();
    let ops: Vec<LinOp> = (0..3).map(|_| hyperbolic_op(w, 3, &mut rng)).collect();
    let forcing: Vec<SeqVec> = (0..3).map(|_| SeqVec::from_fn(w, NormExp::Two, |_| rng.gen_range(-1.0..1.0))).collect();
    let prob = PeriodicProblem::new(ops, forcing).unwrap();
    let cert = diagonal_certificate(w, |i| i < 3, LAMBDA, 4.0).unwrap();
    let sol = periodic_green_solve(&prob, &cert).unwrap();
    assert!(sol.max_residual < 1e-11, "{}", sol.max_residual);
    assert!(sol.sup_norm <= cert.l_const() * sup_norm(&prob.forcing));
    // a certificate that is not periodic is refused
    let pairs = (0..12).map(|k| ProjPair::coordinates(w, |i| i < 1 + (k % 4))).collect();
    let bad = crate::clstruct::CLCertificate::new(1.0, 0.5, 4.0, Arc::new(IndexFamily::periodic(0, pairs).unwrap())).unwrap();
    assert!(matches!(periodic_green_solve(&prob, &bad), Err(crate::Error::Precondition(_))));
}

fn perturbed(inst: &Instance, eps: f64, seed: u64) -> InhomProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seq = inst.prob.seq();
    let ops: Vec<LinOp> = seq
        .ops()
        .iter()
        .map(|a| {
            let n = a.domain().len();
            let d = scaled(Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)), eps);
            a.add(&LinOp::dense(a.domain(), a.codomain(), d).unwrap()).unwrap()
        })
        .collect();
    InhomProblem::new(OperatorSeq::new(seq.interval().0, ops).unwrap(), inst.prob.forcing().to_vec()).unwrap()
}

#[test]
fn neumann_unperturbed_is_perron() {
    let inst = instance(4, 2, 0, 10, 6);
    let ns = neumann_perturbed_solve(&inst.prob, inst.prob.seq(), &inst.cert).unwrap();
    let ps = perron_solve(&inst.prob, &inst.cert).unwrap();
    assert_eq!(ns.eps, 0.0);
    assert!(ns.solution.max_abs_diff(&ps).unwrap() < 1e-15);
}

#[test]
fn neumann_rate_and_oracle() {
    let inst = instance(4, 2, 0, 12, 7);
    let l = inst.cert.l_const();
    let prob_b = perturbed(&inst, 1.0 / (4.0 * l), 8);
    let ns = neumann_perturbed_solve(&prob_b, inst.prob.seq(), &inst.cert).unwrap();
    assert!((ns.eps - 1.0 / (4.0 * l)).abs() < 1e-12);
    assert!(ns.ratios.iter().all(|r| *r <= 0.25 + 1e-6), "{:?}", ns.ratios);
    assert!(ns.solution.residual_ok());
    assert!(ns.solution.sup_norm <= 2.0 * l * prob_b.w_bound());
    let d = banded_direct_solve(&prob_b, &inst.pairs[0], inst.pairs.last().unwrap()).unwrap();
    assert!(ns.solution.max_abs_diff(&d).unwrap() <= 1e-8);
    let too_big = perturbed(&inst, 0.6 / l, 9);
    assert!(matches!(
        neumann_perturbed_solve(&too_big, inst.prob.seq(), &inst.cert),
        Err(crate::Error::Precondition(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn perron_agrees_with_oracle(seed in 0u64..10_000, dim in 2usize..=6, len in 1usize..=20, split_frac in 0.0f64..1.0) {
        let split = 1 + ((dim - 1) as f64 * split_frac) as usize;
        let split = split.min(dim - 1);
        let inst = instance(dim, split, -3, len, seed);
        let sol = perron_solve(&inst.prob, &inst.cert).unwrap();
        prop_assert!(sol.max_abs_diff(&direct(&inst)).unwrap() <= 1e-8);
        prop_assert!(sol.residual_ok());
        prop_assert!(sol.sup_norm <= inst.cert.l_const() * inst.prob.w_bound() * (1.0 + 1e-12));
    }

    #[test]
    fn perron_is_linear(seed in 0u64..10_000, c in -3.0f64..3.0) {
        let i1 = instance(3, 1, 0, 8, seed);
        let i2 = instance(3, 1, 0, 8, seed + 1);
        let seq = i1.prob.seq().clone();
        let mix: Vec<SeqVec> = i1.prob.forcing().iter().zip(i2.prob.forcing()).map(|(x, y)| x.axpy(c, y).unwrap()).collect();
        let p2 = InhomProblem::new(seq.clone(), i2.prob.forcing().to_vec()).unwrap();
        let pm = InhomProblem::new(seq, mix).unwrap();
        let s1 = perron_solve(&i1.prob, &i1.cert).unwrap();
        let s2 = perron_solve(&p2, &i1.cert).unwrap();
        let sm = perron_solve(&pm, &i1.cert).unwrap();
        for k in 0..=8i64 {
            let comb = s1.at(k).axpy(c, s2.at(k)).unwrap();
            prop_assert!(comb.dist(sm.at(k)).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn nested_intervals_keep_the_bound(seed in 0u64..10_000, inner in 2usize..10) {
        // the long instance contains the short one's operators and forcing in its middle
        let long = instance(4, 2, -10, 24, seed);
        let lo = -10 + 24 / 2 - inner as i64 / 2;
        let short_seq = long.prob.seq().restrict(lo, lo + inner as i64).unwrap();
        let forcing: Vec<SeqVec> = ((lo + 1)..=(lo + inner as i64)).map(|k| long.prob.w(k).clone()).collect();
        let short = InhomProblem::new(short_seq, forcing).unwrap();
        let bound = long.cert.l_const() * long.prob.w_bound();
        let sl = perron_solve(&long.prob, &long.cert).unwrap();
        let ss = perron_solve(&short, &long.cert).unwrap();
        prop_assert!(sl.sup_norm <= bound && ss.sup_norm <= bound);
        for k in lo..=(lo + inner as i64) {
            prop_assert!(sl.at(k).norm() <= bound);
        }
    }
}

#[test]
fn public_oracle_instances_agree() {
    for seed in 0..12 {
        let inst = random_instance(6, 20, seed).unwrap();
        let cmp = compare_with_oracle(&inst).unwrap();
        assert!(cmp.dim <= 6 && cmp.len <= 20);
        assert!(cmp.max_discrepancy <= 1e-8, "{cmp:?}");
    }
    // degenerate splits: everything stable, everything unstable
    for split in [0, 3] {
        let cmp = compare_with_oracle(&hyperbolic_instance(3, split, 0, 6, 5).unwrap()).unwrap();
        assert!(cmp.max_discrepancy <= 1e-8);
    }
}
