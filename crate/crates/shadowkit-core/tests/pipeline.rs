//! End-to-end use of the public API: certify, shadow, compare solvers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shadowkit_core::boundedsol::{compare_with_oracle, hyperbolic_instance, ORACLE_LAMBDA};
use shadowkit_core::clstruct::{shift_certificate, verify_cl_diffeo, VerifyOptions};
use shadowkit_core::seqcore::{NormExp, Window};
use shadowkit_core::shadow::{make_pseudotrajectory, shadow, shadowing_constants, step_errors, ShadowOptions};
use shadowkit_core::systems::{random_point, WeightedShift};
use shadowkit_core::Error;

#[test]
fn certified_tanh_shift_shadows_noisy_orbits() {
    let w = Window::symmetric(50);
    let p = NormExp::Inf;
    let f = WeightedShift::tanh(w, p);
    let cert = shift_certificate(&f, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let points: Vec<_> = (0..3).map(|_| random_point(w, p, 3, 0.5, &mut rng)).collect();
    let opts = VerifyOptions { horizon: 20, ..VerifyOptions::default() };
    let rep = verify_cl_diffeo(&f, &cert, &points, &opts).unwrap();
    assert!(rep.pass, "{:?}", rep.notes);

    let m = shadowing_constants(&f, &cert).unwrap().m;
    let d = 1e-4;
    for seed in 0..4u64 {
        let t = make_pseudotrajectory(&f, &points[0], 30, d, seed, Some(Window::symmetric(3))).unwrap();
        let r = shadow(&f, &t, &cert, &ShadowOptions::default()).unwrap();
        assert!(r.sup_distance <= 2.0 * m * d, "{} > {}", r.sup_distance, 2.0 * m * d);
        let steps = step_errors(&f, &r.trajectory, false).unwrap();
        assert!(steps.iter().all(|s| *s <= 1e-11));
    }
}

#[test]
fn solvers_agree_across_splits() {
    for dim in 1..=5 {
        for split in 0..=dim {
            let inst = hyperbolic_instance(dim, split, -3, 12, (dim * 10 + split) as u64).unwrap();
            assert_eq!(inst.cert.lambda, ORACLE_LAMBDA);
            let c = compare_with_oracle(&inst).unwrap();
            assert!(c.max_discrepancy <= 1e-10, "dim {dim} split {split}: {c:?}");
        }
    }
}

#[test]
fn malformed_instances_are_rejected() {
    assert!(matches!(hyperbolic_instance(0, 0, 0, 4, 1), Err(Error::InvalidInput(_))));
    assert!(matches!(hyperbolic_instance(3, 4, 0, 4, 1), Err(Error::InvalidInput(_))));
    assert!(matches!(hyperbolic_instance(3, 1, 0, 0, 1), Err(Error::InvalidInput(_))));
}
