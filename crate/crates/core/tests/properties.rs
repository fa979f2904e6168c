mod common;

use common::*;
use lumpkit::jacobian::{membership_residual, sample_jacobian_basis, SamplingDomain};
use lumpkit::lumping::{approximate_lump, epsilon_max, max_residual};
use lumpkit::model::parse_expr;
use lumpkit::rng::SampleRng;
use lumpkit::simulate::{error_bound_constant, integrate, reduction_report, ReportOptions, SolverConfig};
use lumpkit::parse_model;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn random_point(rng: &mut SampleRng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.uniform_in(-2.0, 2.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ad_matches_finite_differences(seed in 0u64..10_000, m in 2usize..6) {
        let sys = random_polynomial_system(seed, m, 3);
        let mut rng = SampleRng::new(seed ^ 0xabcd);
        for _ in 0..5 {
            let x = random_point(&mut rng, m);
            let (_, ad) = sys.eval_drift_dual(&x).unwrap();
            let fd = finite_difference_jacobian(&sys, &x);
            for (a, f) in ad.iter().zip(fd.iter()) {
                prop_assert!((a - f).abs() <= 1e-6 * a.abs().max(1.0), "{} vs {}", a, f);
            }
        }
    }

    #[test]
    fn model_text_round_trips(seed in 0u64..10_000, m in 2usize..6) {
        let sys = random_polynomial_system(seed, m, 3);
        let back = parse_model(&sys.to_model_text()).unwrap();
        prop_assert_eq!(back.var_names(), sys.var_names());
        prop_assert_eq!(back.observables(), sys.observables());
        let mut rng = SampleRng::new(seed);
        for _ in 0..5 {
            let x = random_point(&mut rng, m);
            prop_assert_eq!(back.eval_drift(&x).unwrap(), sys.eval_drift(&x).unwrap());
        }
    }

    #[test]
    fn printed_expression_reparses_to_same_value(a in -5i32..5, b in 1u32..4, c in -3.0f64..3.0) {
        let names = ["u".to_string(), "v".to_string()];
        let text = format!("({a} - u*v)^{b} / (1 + v^2) + {c:?}*u");
        let e = parse_expr(&text, &names).unwrap();
        let again = parse_expr(&e.display_with(&names).to_string(), &names).unwrap();
        for x in [[0.5, -1.0], [2.0, 0.25], [-1.5, 3.0]] {
            let (p, q) = (e.eval(&x).unwrap(), again.eval(&x).unwrap());
            prop_assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0));
        }
    }

    #[test]
    fn lumping_invariants(seed in 0u64..10_000, m in 3usize..7, frac in 0.0f64..1.2) {
        let sys = random_polynomial_system(seed, m, 3);
        let dom = SamplingDomain::default_for(&sys).with_seed(seed);
        let basis = sample_jacobian_basis(&sys, &dom).unwrap();
        let obs = sys.observables();
        let eps_max = epsilon_max(&basis, obs).unwrap();
        let eps = frac * eps_max;
        let l = approximate_lump(&basis, obs, eps).unwrap();
        let lm = l.matrix();
        let k = lm.nrows();
        prop_assert!(k >= 1 && k <= m);
        // orthonormal rows
        let gram = lm * lm.transpose();
        prop_assert!((gram - DMatrix::identity(k, k)).abs().max() <= 1e-10);
        // observables lie in the row space
        let resid = obs - obs * lm.transpose() * lm;
        prop_assert!(resid.abs().max() <= 1e-8 * obs.abs().max().max(1.0));
        // nothing left above the threshold
        let scale = basis.matrices().iter().map(|j| j.norm()).fold(1.0, f64::max);
        prop_assert!(max_residual(&basis, lm) <= eps + 1e-9 * scale);
        // collapse at and above ε_max
        let above = approximate_lump(&basis, obs, eps_max * (1.0 + 1e-9)).unwrap();
        prop_assert_eq!(above.size(), 1);
    }

    #[test]
    fn sampled_basis_spans_fresh_jacobians(seed in 0u64..10_000, m in 2usize..5) {
        let sys = random_polynomial_system(seed, m, 2);
        let basis = sample_jacobian_basis(&sys, &SamplingDomain::default_for(&sys).with_seed(seed)).unwrap();
        prop_assert!(basis.len() <= m * m);
        let mut rng = SampleRng::new(seed + 1);
        for _ in 0..5 {
            let x = random_point(&mut rng, m);
            let (_, jac) = sys.eval_drift_dual(&x).unwrap();
            prop_assert!(membership_residual(&basis, &jac) <= 1e-7 * jac.norm().max(1.0));
        }
    }

    #[test]
    fn bound_constant_grows_with_horizon(c in 0.0f64..5.0, t in 0.01f64..10.0) {
        let k1 = error_bound_constant(c, 1.0, 1.0, t).unwrap();
        let k2 = error_bound_constant(c, 1.0, 1.0, 1.5 * t).unwrap();
        prop_assert!(k1 >= t * (1.0 - 1e-12));
        prop_assert!(k2 >= k1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exact_lumping_commutes_with_integration(x0 in prop::array::uniform3(0.2f64..2.0)) {
        let sys = lumpable();
        let basis = sample_jacobian_basis(&sys, &SamplingDomain::default_for(&sys)).unwrap();
        let l = approximate_lump(&basis, sys.observables(), 0.0).unwrap().matrix().clone();
        prop_assert_eq!(l.nrows(), 2);
        let solver = SolverConfig::with_tolerances(1e-8, 1e-10);
        let report = reduction_report(&sys, &l, &DVector::from_row_slice(&x0), 1.0, &solver, &ReportOptions::default()).unwrap();
        prop_assert_eq!(report.error[0], 0.0);
        for (x, e) in report.original_states.iter().zip(&report.error) {
            let lx = (&l * x).norm();
            prop_assert!(*e <= 10.0 * (solver.rel_tol * lx + solver.abs_tol), "{} at |Lx| {}", e, lx);
        }
    }
}

#[test]
fn tighter_tolerance_does_not_worsen_error() {
    let sys = perturbed();
    let l = two_row_lumping();
    let x0 = DVector::from_element(3, 1.0);
    let run = |rel: f64| {
        reduction_report(&sys, &l, &x0, 1.75, &SolverConfig::with_tolerances(rel, rel * 1e-3), &ReportOptions::default())
            .unwrap()
            .e_max
    };
    let reference = run(1e-11);
    let mut previous = f64::INFINITY;
    for rel in [1e-5, 5e-6, 2.5e-6, 1.25e-6] {
        let gap = (run(rel) - reference).abs();
        assert!(gap <= 2.0 * previous.max(1e-9), "rel {rel}: gap {gap} vs previous {previous}");
        previous = gap;
    }
}

#[test]
fn integrator_is_deterministic() {
    let sys = perturbed();
    let cfg = SolverConfig::default();
    let a = integrate(&sys, &DVector::from_element(3, 1.0), 1.75, &cfg).unwrap();
    let b = integrate(&sys, &DVector::from_element(3, 1.0), 1.75, &cfg).unwrap();
    assert_eq!(a, b);
}
