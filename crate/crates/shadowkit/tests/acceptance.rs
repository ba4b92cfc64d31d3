//! Acceptance suite: one test per criterion. Each prints a single PASS/FAIL line with its
//! runtime against the budget, straight to stderr so it shows without `--nocapture`.

use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shadowkit::catalog::{self, Built, SystemSpec};
use shadowkit::config::{Experiment, ExperimentConfig};
use shadowkit::experiments::perturb_sequence;
use shadowkit_core::boundedsol::{compare_with_oracle, perron_solve, random_instance, InhomProblem};
use shadowkit_core::clstruct::{
    no_ed_certificate, shift_certificate, transported_certificate, unit_growth, verify_cl_diffeo, verify_cl_opseq,
    verify_dichotomy, Side, VerifyOptions,
};
use shadowkit_core::graphtf::{graph_transform_seq, max_graph_epsilon, perturbed_cl_for_diffeo, GraphOptions};
use shadowkit_core::semiconj::{evaluate_point, h1_at, h2_at, ConjOptions, ConjugacyJob};
use shadowkit_core::seqcore::{NormExp, OperatorSeq, SeqVec, Window};
use shadowkit_core::shadow::{
    make_pseudotrajectory, perturb_periodic_orbit, shadow, shadow_periodic, shadowing_constants, step_errors,
    ShadowOptions,
};
use shadowkit_core::systems::{
    conjugate, make_linear_example_seq, orbit_segment, random_point, CoordSine, Diffeo, PerturbKind, Perturbed,
    WeightedShift,
};

static SERIAL: Mutex<()> = Mutex::new(());

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Runs one criterion alone, prints its line and fails the test on a failed check or a blown budget.
fn criterion(n: u32, title: &str, budget_s: f64, body: impl FnOnce() -> Verdict) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let r = body();
    let secs = t.elapsed().as_secs_f64();
    let (pass, detail) = match r {
        Ok(d) if secs <= budget_s => (true, d),
        Ok(d) => (false, format!("{d}; over the runtime budget")),
        Err(e) => (false, e),
    };
    let line = format!(
        "criterion {n:>2} {} [{secs:.2}s / {budget_s}s] {title}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{line}");
}

fn pts(w: Window, p: NormExp, n: usize, radius: i64, amp: f64, seed: u64) -> Vec<SeqVec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_point(w, p, radius, amp, &mut rng)).collect()
}

#[test]
fn c01_perron_solver_bound() {
    criterion(1, "Perron solution bound C^2(1+l)/(1-l) = 3 on the linear shift", 5.0, || {
        // forcing on [-10, 10] travels at most 60 sites: nothing reaches the edge of [-80, 80]
        let w = Window::symmetric(80);
        let f = WeightedShift::linear(w, NormExp::Inf);
        let cert = ok(shift_certificate(&f, 0))?;
        let bound = cert.l_const();
        ensure(bound == 3.0, || format!("L = {bound}"))?;
        let a = ok(f.dforward(&SeqVec::zeros(w, NormExp::Inf)))?;
        let seq = ok(OperatorSeq::new(-30, vec![a; 60]))?;
        let mut worst = 0.0f64;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let forcing: Vec<SeqVec> = (0..60)
                .map(|_| {
                    let v = SeqVec::from_fn(w, NormExp::Inf, |i| if i.abs() <= 10 { rng.gen_range(-1.0..1.0) } else { 0.0 });
                    let n = v.norm();
                    v.scale(1.0 / n)
                })
                .collect();
            let prob = ok(InhomProblem::new(seq.clone(), forcing))?;
            ensure((prob.w_bound() - 1.0).abs() <= 1e-15, || "forcing not normalized".into())?;
            let sol = ok(perron_solve(&prob, &cert))?;
            ensure(sol.residual_ok(), || format!("seed {seed}: residual {:e}", sol.max_residual))?;
            worst = worst.max(sol.sup_norm);
        }
        ensure(worst <= 3.0 + 1e-9, || format!("sup norm {worst}"))?;
        Ok(format!("100 forcings on |I| = 60, max sup norm {worst:.6} <= 3"))
    });
}

#[test]
fn c02_oracle_equivalence() {
    criterion(2, "Perron sums match the direct banded solve", 10.0, || {
        let mut worst = 0.0f64;
        for seed in 0..50u64 {
            let inst = ok(random_instance(6, 20, seed))?;
            let c = ok(compare_with_oracle(&inst))?;
            ensure(c.dim <= 6 && c.len <= 20, || "instance too large".into())?;
            worst = worst.max(c.max_discrepancy);
        }
        ensure(worst <= 1e-8, || format!("max discrepancy {worst:e}"))?;
        Ok(format!("50 instances, max discrepancy {worst:.3e} <= 1e-8"))
    });
}

#[test]
fn c03_lipschitz_shadowing_ratio() {
    criterion(3, "shadowing ratio at most 2M = 12 on the linear shift", 30.0, || {
        let w = Window::symmetric(50);
        let p = NormExp::Inf;
        let f = WeightedShift::linear(w, p);
        let cert = ok(shift_certificate(&f, 0))?;
        let m = ok(shadowing_constants(&f, &cert))?.m;
        ensure(m == 6.0, || format!("M = {m}"))?;
        let (mut worst, mut worst_step) = (0.0f64, 0.0f64);
        for d in [1e-2, 1e-3, 1e-4, 1e-5] {
            for seed in 0..20u64 {
                let x0 = random_point(w, p, 4, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
                let t = ok(make_pseudotrajectory(&f, &x0, 40, d, seed, Some(Window::symmetric(4))))?;
                ensure(t.d <= d, || "noise above d".into())?;
                let r = ok(shadow(&f, &t, &cert, &ShadowOptions::default()))?;
                worst = worst.max(r.sup_distance / d);
                let steps = ok(step_errors(&f, &r.trajectory, false))?;
                worst_step = worst_step.max(steps.into_iter().fold(0.0, f64::max));
            }
        }
        ensure(worst <= 12.0, || format!("ratio {worst}"))?;
        ensure(worst_step <= 1e-11, || format!("step error {worst_step:e}"))?;
        Ok(format!("80 cells, max sup_distance/d {worst:.4} <= 12, max step error {worst_step:.2e}"))
    });
}

#[test]
fn c04_refinement_halving() {
    criterion(4, "every refinement halves the step error on the tanh shift", 30.0, || {
        let w = Window::symmetric(50);
        let f = WeightedShift::tanh(w, NormExp::Inf);
        let cert = ok(shift_certificate(&f, 0))?;
        let d0 = ok(shadowing_constants(&f, &cert))?.d0_inf;
        ensure(d0.is_finite() && d0 > 0.0, || format!("d0 = {d0}"))?;
        let d = 0.5 * d0;
        let mut worst = 0.0f64;
        let mut refinements = 0;
        for seed in 0..10u64 {
            let x0 = random_point(w, NormExp::Inf, 4, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
            let t = ok(make_pseudotrajectory(&f, &x0, 40, d, seed, Some(Window::symmetric(4))))?;
            let r = ok(shadow(&f, &t, &cert, &ShadowOptions::default()))?;
            ensure(r.within_guarantee, || "d not below d0".into())?;
            for pair in r.error_history.windows(2) {
                refinements += 1;
                ensure(pair[1] <= pair[0] / 2.0 * (1.0 + 1e-6), || format!("seed {seed}: {:e} -> {:e}", pair[0], pair[1]))?;
                if pair[0] > 0.0 {
                    worst = worst.max(pair[1] / pair[0]);
                }
            }
        }
        Ok(format!("d = d0/2 = {d:.3e}, {refinements} refinements, worst factor {worst:.3e} <= 1/2"))
    });
}

#[test]
fn c05_periodic_shadowing_and_chain_demo() {
    criterion(5, "periodic shadowing within 2M d and periodic points within M d", 60.0, || {
        let mut worst = 0.0f64;
        for f in [WeightedShift::linear(Window::symmetric(40), NormExp::Inf), WeightedShift::tanh(Window::symmetric(40), NormExp::Inf)] {
            let cert = ok(shift_certificate(&f, 0))?;
            let m1 = ok(shadowing_constants(&f, &cert))?.m;
            let zero = SeqVec::zeros(f.window(), NormExp::Inf);
            for period in [1usize, 5, 12] {
                for seed in 0..5u64 {
                    let d = 1e-4;
                    let t = ok(perturb_periodic_orbit(&f, &vec![zero.clone(); period], d, seed, Some(Window::symmetric(4))))?;
                    let r = ok(shadow_periodic(&f, &t, &cert, &ShadowOptions::default()))?;
                    ensure(r.periodic && r.trajectory.len() == period, || "period lost".into())?;
                    let steps = ok(step_errors(&f, &r.trajectory, true))?;
                    ensure(steps.iter().all(|e| *e <= 1e-11), || format!("not periodic: {steps:?}"))?;
                    ensure(r.sup_distance <= 2.0 * m1 * d, || format!("m = {period}: ratio {}", r.sup_distance / d))?;
                    worst = worst.max(r.sup_distance / d / (2.0 * m1));
                }
            }
        }
        // chain-demo through the runner: Morse-Smale product, d in {1e-2, 1e-3, 1e-4}
        let mut cfg = ExperimentConfig::for_experiment(Experiment::ChainDemo);
        cfg.d_sweep = vec![1e-2, 1e-3, 1e-4];
        let cfg = ok(cfg.resolve())?;
        let out = ok(shadowkit::run(&cfg))?;
        ensure(out.pass(), || format!("chain-demo: {:?}", out.checks))?;
        Ok(format!("m in {{1, 5, 12}} at <= {worst:.3} of 2M d; chain-demo {} checks pass", out.checks.len()))
    });
}

#[test]
fn c06_structure_without_dichotomy() {
    criterion(6, "(C, l)-structure holds while the dichotomy on Z+ fails", 5.0, || {
        let w = Window::symmetric(24);
        let seq = ok(make_linear_example_seq(w, (-10, 10)))?;
        let cert = ok(no_ed_certificate(w))?;
        ensure(cert.c == 1.0 && cert.lambda == 0.5, || "constants".into())?;
        let opts = VerifyOptions { horizon: 20, ..VerifyOptions::default() };
        let cl = ok(verify_cl_opseq(&seq, &cert, &opts, None))?;
        ensure(cl.pass, || format!("structure rejected: {:?}", cl.notes))?;
        let ed = ok(verify_dichotomy(&seq, &cert, Side::Plus, &opts))?;
        ensure(!ed.pass, || "dichotomy accepted".into())?;
        let wide = ok(make_linear_example_seq(w, (-21, 1)))?;
        for m in -20i64..=-1 {
            let g = ok(unit_growth(&wide, m, 0, m, NormExp::Two))?;
            ensure(g == 2f64.powi(-m as i32), || format!("m = {m}: growth {g}"))?;
        }
        Ok("structure PASS, dichotomy FAIL, growth 2^-m exact for m in [-20, -1]".into())
    });
}

#[test]
fn c07_graph_transform_robustness() {
    criterion(7, "graph transform on the perturbed non-dichotomic sequence", 30.0, || {
        let w = Window::symmetric(10);
        let a = ok(make_linear_example_seq(w, (-8, 8)))?;
        let cert = ok(no_ed_certificate(w))?;
        let opts = GraphOptions::default();
        let zero = ok(graph_transform_seq(&a, &cert, &a, &opts))?;
        ensure(zero.graph.h.iter().chain(&zero.graph.h_u).all(|h| h.is_zero()), || "H nonzero for B = A".into())?;
        let eps = max_graph_epsilon(cert.c, cert.lambda, cert.r) / 2.0;
        let (mut worst_inc, mut worst_ratio) = (0.0f64, 0.0f64);
        for seed in 0..5u64 {
            let b = ok(perturb_sequence(&a, eps, NormExp::Two, seed))?;
            let pc = ok(graph_transform_seq(&a, &cert, &b, &opts))?;
            ensure(pc.graph.attained <= pc.graph.eps2 && pc.graph.attained_u <= pc.graph.eps2_u, || {
                format!("|H| {} over 2L'C eps = {}", pc.graph.attained, pc.graph.eps2)
            })?;
            worst_inc = worst_inc.max(pc.max_inclusion_residual());
            worst_ratio = worst_ratio.max(pc.max_ratio());
            ensure(pc.lambda == 0.75, || format!("lambda1 = {}", pc.lambda))?;
            let rep = ok(verify_cl_opseq(&b, &ok(pc.certificate())?, &VerifyOptions::default(), None))?;
            ensure(rep.pass, || format!("seed {seed}: perturbed certificate rejected"))?;
        }
        ensure(worst_inc <= 1e-9, || format!("inclusion {worst_inc:e}"))?;
        ensure(worst_ratio <= 0.5 + 1e-9, || format!("ratio {worst_ratio}"))?;
        Ok(format!("5 perturbations at eps {eps:.3e}: inclusion {worst_inc:.2e}, ratio {worst_ratio:.4}, H = 0 exactly for B = A"))
    });
}

#[test]
fn c08_diffeomorphism_robustness() {
    criterion(8, "perturbed shift certified along g-orbits at lambda1 = 3/4", 60.0, || {
        let w = Window::symmetric(30);
        let f = Arc::new(WeightedShift::linear(w, NormExp::Inf));
        let cert = ok(shift_certificate(&f, 0))?;
        let g = ok(Perturbed::new(f.clone(), 1e-4, PerturbKind::Ahead))?;
        let opts = VerifyOptions { stop_outside_cert: true, ..VerifyOptions::default() };
        for seed in 0..10u64 {
            let x = random_point(w, NormExp::Inf, 3, 0.5, &mut ChaCha8Rng::seed_from_u64(seed));
            let orbit = ok(orbit_segment(&g, &x, 20, 19))?;
            ensure(orbit.len() == 40, || "orbit length".into())?;
            let oc = ok(perturbed_cl_for_diffeo(f.as_ref(), &cert, &g, 1e-4, &orbit, false, &GraphOptions::default()))?;
            let c = ok(oc.certificate())?;
            ensure(c.lambda == (1.0 + cert.lambda) / 2.0, || format!("lambda1 = {}", c.lambda))?;
            let rep = ok(verify_cl_diffeo(&g, &c, &orbit, &opts))?;
            ensure(rep.pass, || format!("seed {seed}: {:?}", rep.notes))?;
        }
        Ok("10 orbits of length 40 pass at (C1, 0.75)".into())
    });
}

#[test]
fn c09_semiconjugacies() {
    criterion(9, "semi-conjugacies at d = 1e-4 on 20 points", 60.0, || {
        let d = 1e-4;
        let f = Arc::new(WeightedShift::tanh(Window::symmetric(45), NormExp::Inf));
        let cert = ok(shift_certificate(&f, 0))?;
        let g = ok(Perturbed::new(f.clone(), d / 2.0, PerturbKind::Ahead))?;
        let job = ok(ConjugacyJob::new(f.as_ref(), &g, cert.clone(), d, 30, ConjOptions::default()))?;
        let doubled = ok(job.with_truncation(60))?;
        let bound = 2.0 * job.consts.l * d;
        let (mut worst_h, mut worst_res, mut worst_change) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..20u64 {
            let x = random_point(f.window(), NormExp::Inf, 3, 0.5, &mut ChaCha8Rng::seed_from_u64(100 + i));
            let s = ok(evaluate_point(&job, Some(&doubled), i as usize, &x))?;
            let tol = 1e-9 * (1.0 + s.x_norm);
            ensure(s.row.h1_norm <= bound && s.row.h2_norm <= bound, || format!("point {i}: {:?}", s.row))?;
            ensure(s.row.residual1 <= tol && s.row.residual2 <= tol, || format!("point {i}: {:?}", s.row))?;
            let change = s.h1_change.unwrap_or(f64::INFINITY).max(s.h2_change.unwrap_or(f64::INFINITY));
            ensure(change <= 1e-10, || format!("point {i}: doubling T moves values by {change:e}"))?;
            worst_h = worst_h.max(s.row.h1_norm.max(s.row.h2_norm));
            worst_res = worst_res.max(s.row.residual1.max(s.row.residual2));
            worst_change = worst_change.max(change);
        }
        let same = ok(ConjugacyJob::new(f.as_ref(), f.as_ref(), cert, d, 30, ConjOptions::default()))?;
        let x = random_point(f.window(), NormExp::Inf, 3, 0.5, &mut ChaCha8Rng::seed_from_u64(1));
        ensure(ok(h1_at(&same, &x))?.value.is_zero() && ok(h2_at(&same, &x))?.value.is_zero(), || "g = f not zero".into())?;
        Ok(format!(
            "max |h| {worst_h:.3e} <= 2Ld = {bound:.3e}, residual {worst_res:.2e}, doubling {worst_change:.2e}, g = f gives 0"
        ))
    });
}

#[test]
fn c10_conjugacy_invariance() {
    criterion(10, "transported certificate for h f h^-1 with constants (l, R1^2 C)", 30.0, || {
        let w = Window::symmetric(30);
        let p = NormExp::Two;
        let base = WeightedShift::tanh(w, p);
        let cert = ok(shift_certificate(&base, 0))?;
        let h = Arc::new(ok(CoordSine::new(w, p, 0.05))?);
        let g = ok(conjugate(Arc::new(base), h.clone()))?;
        let r1 = g.r1();
        let tc = ok(transported_certificate(&cert, h, r1, g.deriv_bound()))?;
        ensure(tc.lambda == cert.lambda, || "lambda changed".into())?;
        ensure((tc.c - r1 * r1 * cert.c).abs() <= 1e-12, || format!("C = {}", tc.c))?;
        let opts = VerifyOptions { horizon: 15, ..VerifyOptions::default() };
        let rep = ok(verify_cl_diffeo(&g, &tc, &pts(w, p, 4, 4, 1.0, 6), &opts))?;
        ensure(rep.pass, || format!("{:?}", rep.notes))?;
        // same system through the catalog, checked by the runner
        let spec = SystemSpec::named("conjugated:weighted_shift_tanh");
        let Built::Map(m) = ok(catalog::build(&spec, 30, p))? else {
            return Err("catalog returned a sequence".into());
        };
        ensure(m.cert.c == tc.c && m.cert.lambda == tc.lambda, || "catalog constants differ".into())?;
        Ok(format!("C = R1^2 C = {:.6}, lambda = {}, 4 orbits verified", tc.c, tc.lambda))
    });
}
