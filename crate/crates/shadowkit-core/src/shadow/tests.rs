use super::*;
use crate::clstruct::{ms_certificate, shift_certificate};
use crate::seqcore::{NormExp, SeqVec, Window};
use crate::systems::{make_ms_product, random_point, Diffeo, Modulus, MsParams, WeightedShift};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup_linear(p: NormExp) -> (WeightedShift, CLCertificate, Window) {
    let w = Window::symmetric(50);
    let f = WeightedShift::linear(w, p);
    let cert = shift_certificate(&f, 0).unwrap();
    (f, cert, w)
}

fn start(w: Window, p: NormExp, seed: u64) -> SeqVec {
    random_point(w, p, 4, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn core() -> Option<Window> {
    Some(Window::symmetric(4))
}

#[test]
fn pseudotrajectory_construction() {
    let (f, _, w) = setup_linear(NormExp::Two);
    let x0 = start(w, NormExp::Two, 1);
    let exact = make_pseudotrajectory(&f, &x0, 20, 0.0, 1, core()).unwrap();
    assert_eq!(exact.d, 0.0);
    let t = make_pseudotrajectory(&f, &x0, 20, 1e-3, 1, core()).unwrap();
    assert!(t.d <= 1e-3 && t.d > 0.0);
    let r = f.deriv_bound();
    for k in 0..19 {
        let back = f.inverse(&t.points[k + 1]).unwrap();
        assert!(t.points[k].dist(&back).unwrap() <= r * t.d);
        assert!((t.step_errors[k] - t.points[k + 1].dist(&f.forward(&t.points[k]).unwrap()).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn constants_for_the_examples() {
    let (f, cert, _) = setup_linear(NormExp::Two);
    let sc = shadowing_constants(&f, &cert).unwrap();
    assert_eq!((sc.l, sc.m), (3.0, 6.0));
    assert!(sc.d0.is_infinite() && sc.d0_inf.is_infinite());
    let s = serde_json::to_string(&sc).unwrap();
    assert!(s.contains("\"d0\":\"inf\""));

    let g = WeightedShift::tanh(Window::symmetric(20), NormExp::Two);
    let gc = shift_certificate(&g, 0).unwrap();
    let sc = shadowing_constants(&g, &gc).unwrap();
    assert_eq!(g.modulus(), Modulus::Linear(0.1));
    assert_eq!(sc.r, 2.5);
    // closed form of the binding inequality: 3 + 2(RM+R)(RM+R+L)^2 0.1 d = 6
    let k = 2.5 * 6.0 + 2.5 + 3.0;
    let closed = 3.0 / (2.0 * (2.5 * 6.0 + 2.5) * k * k * 0.1);
    assert!((sc.d0 - closed).abs() <= 1e-12 * closed);
    assert_eq!(sc.d0_inf, sc.d0);
    let m = g.modulus();
    assert!(sc.cond_m2a(m, sc.d0) && sc.cond_m2b(m, sc.d0) && sc.cond_half(m, sc.d0));
    assert!(!sc.cond_m2a(m, sc.d0 * (1.0 + 1e-9)));
}

#[test]
fn exact_input_is_left_alone() {
    let (f, cert, w) = setup_linear(NormExp::Two);
    let t = make_pseudotrajectory(&f, &start(w, NormExp::Two, 2), 10, 0.0, 2, core()).unwrap();
    let r = shadow(&f, &t, &cert, &ShadowOptions::default()).unwrap();
    assert_eq!(r.iterations, 0);
    assert_eq!(r.trajectory, t.points);
    assert_eq!(refine_once(&f, &t, &cert).unwrap().points, t.points);
}

#[test]
fn linear_refinement_is_exact_in_one_step() {
    let (f, cert, w) = setup_linear(NormExp::Two);
    let t = make_pseudotrajectory(&f, &start(w, NormExp::Two, 3), 40, 1e-3, 3, core()).unwrap();
    let step = refine_once(&f, &t, &cert).unwrap();
    assert!(step.d_after < 1e-14, "{}", step.d_after);
    assert!(!step.used_fallback);
}

#[test]
fn tanh_single_step_bounds() {
    let w = Window::symmetric(50);
    let f = WeightedShift::tanh(w, NormExp::Two);
    let cert = shift_certificate(&f, 0).unwrap();
    let t = make_pseudotrajectory(&f, &start(w, NormExp::Two, 4), 40, 1e-3, 4, core()).unwrap();
    let step = refine_once(&f, &t, &cert).unwrap();
    assert!(step.d_after <= 5e-4);
    assert!(step.displacement <= 6e-3);
}

#[test]
fn linear_shadowing_ratio() {
    let (f, cert, w) = setup_linear(NormExp::Two);
    for seed in 0..4 {
        let t = make_pseudotrajectory(&f, &start(w, NormExp::Two, seed), 40, 1e-4, seed, core()).unwrap();
        let r = shadow(&f, &t, &cert, &ShadowOptions::default()).unwrap();
        assert!(r.sup_distance <= 12.0 * t.d);
        assert!(r.final_step_error <= 1e-11);
        assert!(r.within_guarantee);
        let exact = step_errors(&f, &r.trajectory, false).unwrap();
        assert!(exact.iter().all(|e| *e <= 1e-11));
    }
}

#[test]
fn tanh_refinements_halve() {
    let w = Window::symmetric(50);
    let f = WeightedShift::tanh(w, NormExp::Inf);
    let cert = shift_certificate(&f, 0).unwrap();
    let d0 = shadowing_constants(&f, &cert).unwrap().d0_inf;
    let t = make_pseudotrajectory(&f, &start(w, NormExp::Inf, 5), 40, 0.5 * d0, 5, core()).unwrap();
    let r = shadow(&f, &t, &cert, &ShadowOptions::default()).unwrap();
    assert!(r.within_guarantee);
    for pair in r.error_history.windows(2) {
        assert!(pair[1] <= pair[0] / 2.0 * (1.0 + 1e-6));
    }
    assert!(r.displacements.iter().sum::<f64>() <= 2.0 * r.constants.m * t.d);
    assert!(r.sup_distance <= 2.0 * r.constants.m * t.d);
}

#[test]
fn ms_product_shadowing() {
    let w = Window::symmetric(12);
    let f = make_ms_product(MsParams::default(), w, NormExp::Inf).unwrap();
    let (cert, _) = ms_certificate(&f, 60).unwrap();
    let x0 = random_point(w, NormExp::Inf, 6, 2.0, &mut ChaCha8Rng::seed_from_u64(6));
    let t = make_pseudotrajectory(&f, &x0, 30, 1e-4, 6, Some(Window::symmetric(6))).unwrap();
    let r = shadow(&f, &t, &cert, &ShadowOptions::default()).unwrap();
    assert_eq!(r.constants.m, 14.0);
    // beyond the guaranteed range; the bound is still observed
    assert!(!r.within_guarantee);
    assert!(r.ratio() <= 2.0 * r.constants.m);
}

#[test]
fn periodic_shadowing_near_the_fixed_point() {
    let w = Window::symmetric(40);
    let zero_tanh = WeightedShift::tanh(w, NormExp::Two);
    let zero_lin = WeightedShift::linear(w, NormExp::Two);
    let zero = SeqVec::zeros(w, NormExp::Two);
    for f in [&zero_tanh, &zero_lin] {
        let cert = shift_certificate(f, 0).unwrap();
        for m in [1usize, 5] {
            let orbit = alloc::vec![zero.clone(); m];
            let t = perturb_periodic_orbit(f, &orbit, 1e-4, 7, core()).unwrap();
            assert!(t.d <= 1e-4);
            let r = shadow_periodic(f, &t, &cert, &ShadowOptions::default()).unwrap();
            assert!(r.periodic && r.trajectory.len() == m);
            assert!(r.final_step_error <= 1e-11);
            assert!(r.sup_distance <= 2.0 * r.constants.m * t.d);
        }
    }
    // zero is not the only bounded fixed point: the linear shift fixes every c 2^{-|j|}
    let cert = shift_certificate(&zero_lin, 0).unwrap();
    let t = perturb_periodic_orbit(&zero_lin, &[zero.clone()], 1e-4, 8, core()).unwrap();
    let r = shadow_periodic(&zero_lin, &t, &cert, &ShadowOptions::default()).unwrap();
    let x = &r.trajectory[0];
    let c = x.get(0);
    assert!(c.abs() > 1e-7);
    for j in -30i64..=30 {
        assert!((x.get(j) - c * libm::pow(2.0, -(j.abs() as f64))).abs() <= 1e-12 * c.abs());
    }
    let fin = make_pseudotrajectory(&zero_lin, &zero, 5, 1e-4, 1, core()).unwrap();
    assert!(shadow_periodic(&zero_lin, &fin, &cert, &ShadowOptions::default()).is_err());
}

#[test]
fn periodic_point_from_loop() {
    let w = Window::symmetric(8);
    let f = make_ms_product(MsParams::default(), w, NormExp::Inf).unwrap();
    let (cert, _) = ms_certificate(&f, 60).unwrap();
    let fixed = SeqVec::from_fn(w, NormExp::Inf, |i| [-1.0, 0.0, 1.0][(i.rem_euclid(3)) as usize]);
    let same = periodic_point_near(&f, &cert, orbit_loop(&f, &fixed, 1).unwrap(), &ShadowOptions::default()).unwrap();
    assert_eq!(same.distance, 0.0);
    // near the fixed point on its attracting coordinates only
    let x = fixed.map(|_, v| if v != 0.0 { v + 3e-4 } else { 0.0 });
    let lp = orbit_loop(&f, &x, 6).unwrap();
    let d = Pseudotrajectory::new(&f, lp.clone(), true).unwrap().d;
    let got = periodic_point_near(&f, &cert, lp, &ShadowOptions::default()).unwrap();
    assert!(got.point.dist(&fixed).unwrap() < 1e-10);
    assert!(got.distance <= got.result.constants.m * d);
    // scalar Newton cross-check: each nonzero coordinate settles at the attracting fixed point
    for i in w.indices() {
        let v = got.point.get(i);
        if v != 0.0 {
            assert!((f.map().eval(v) - v).abs() < 1e-12);
        }
    }
}

#[test]
fn two_certificates_give_two_orbits() {
    let w = Window::symmetric(50);
    let f = WeightedShift::linear(w, NormExp::Two);
    let t = make_pseudotrajectory(&f, &start(w, NormExp::Two, 9), 30, 1e-3, 9, core()).unwrap();
    let ra = shadow(&f, &t, &shift_certificate(&f, 0).unwrap(), &ShadowOptions::default()).unwrap();
    let rb = shadow(&f, &t, &shift_certificate(&f, 1).unwrap(), &ShadowOptions::default()).unwrap();
    let gap = ra.trajectory.iter().zip(&rb.trajectory).map(|(a, b)| a.dist(b).unwrap()).fold(0.0, f64::max);
    assert!(gap > 1e-6);
    for r in [&ra, &rb] {
        assert!(r.sup_distance <= 2.0 * r.constants.m * t.d);
    }
}
