mod common;

use common::*;
use pgcs_core::assembly::{scaled_operator, LinearOperator};
use pgcs_core::backward_error::backward_error_bounds;
use pgcs_core::conditioning::{condition_numbers_with, NormOptions};
use pgcs_core::estimators::{pce_spectral_norm, PceOptions};
use pgcs_core::io::{parse_problem, to_json, ProblemDoc};
use pgcs_core::kron::{apply_sandwich, kronecker, vectorize};
use pgcs_core::model::{default_tolerances, residual};
use pgcs_core::rng::SeededRng;
use pgcs_core::solver::{spectral_norm_dense, PgcsSystem};
use pgcs_core::{PgcsProblem, PgcsSolution, DEFAULT_DENSE_CAP};
use proptest::prelude::*;

fn instance(seed: u64, p: usize, m: usize, n: usize) -> (PgcsProblem, PgcsSystem, PgcsSolution) {
    let problem = random_problem(&mut SeededRng::new(seed, 0), p, m, n);
    let system = PgcsSystem::new(&problem, DEFAULT_DENSE_CAP).unwrap();
    let solution = system.solve_vector(&problem.rhs_vector()).unwrap();
    (problem, system, solution)
}

fn scale_problem(pr: &PgcsProblem, s: f64) -> PgcsProblem {
    let f = |v: &[pgcs_core::Matrix]| v.iter().map(|m| m * s).collect();
    PgcsProblem::new(f(&pr.a), f(&pr.b), f(&pr.c), f(&pr.d), f(&pr.e), f(&pr.f)).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sandwich_matches_kronecker(seed in any::<u64>(), r in 1usize..5, k in 1usize..5, l in 1usize..5, c in 1usize..5) {
        let mut rng = SeededRng::new(seed, 0);
        let a = rng.normal_matrix(r, k);
        let x = rng.normal_matrix(k, l);
        let cm = rng.normal_matrix(l, c);
        let lhs = apply_sandwich(&a, &cm, &vectorize(&x)).unwrap();
        let rhs = kronecker(&cm.transpose(), &a) * vectorize(&x);
        prop_assert!((&lhs - &rhs).norm() <= 1e-13 * (1.0 + rhs.norm()));
        prop_assert!((lhs - vectorize(&(&a * &x * &cm))).norm() <= 1e-13 * (1.0 + rhs.norm()));
    }

    #[test]
    fn computed_solution_is_backward_stable(seed in any::<u64>(), p in 1usize..4, m in 1usize..4, n in 1usize..4) {
        let (problem, _, solution) = instance(seed, p, m, n);
        let tol = default_tolerances(&problem).unwrap();
        let rep = backward_error_bounds(&problem, &solution, &tol, DEFAULT_DENSE_CAP).unwrap();
        prop_assert!(rep.lower <= rep.upper);
        prop_assert!(rep.upper <= 1e-12, "upper {}", rep.upper);
    }

    #[test]
    fn scaled_operator_transpose_is_adjoint(seed in any::<u64>(), p in 1usize..4, m in 1usize..4, n in 1usize..4) {
        let (problem, _, solution) = instance(seed, p, m, n);
        let h = scaled_operator(&problem, &solution, &default_tolerances(&problem).unwrap()).unwrap();
        let mut rng = SeededRng::new(seed, 1);
        let u = rng.normal_vector(h.ncols());
        let w = rng.normal_vector(h.nrows());
        let lhs = h.apply(&u).dot(&w);
        let rhs = u.dot(&h.apply_transpose(&w));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn condition_numbers_invariant_under_data_scaling(seed in any::<u64>(), p in 1usize..3, m in 1usize..3, n in 1usize..3, s in 0.01f64..100.0) {
        let (problem, system, solution) = instance(seed, p, m, n);
        let scaled = scale_problem(&problem, s);
        let (_, system_s, solution_s) = instance_from(&scaled);
        let opts = NormOptions::default();
        let a = condition_numbers_with(&system, &problem, &solution, &default_tolerances(&problem).unwrap(), &opts).unwrap();
        let b = condition_numbers_with(&system_s, &scaled, &solution_s, &default_tolerances(&scaled).unwrap(), &opts).unwrap();
        for (x, y) in [(a.k_n1, b.k_n1), (a.k_n2, b.k_n2), (a.k_e, b.k_e), (a.mixed, b.mixed), (a.componentwise, b.componentwise)] {
            prop_assert!(close(x, y, 1e-8), "{x} vs {y}");
        }
    }

    #[test]
    fn condition_numbers_ordered(seed in any::<u64>(), p in 1usize..4, m in 1usize..4, n in 1usize..4) {
        let (problem, system, solution) = instance(seed, p, m, n);
        let r = condition_numbers_with(&system, &problem, &solution, &default_tolerances(&problem).unwrap(), &NormOptions::default()).unwrap();
        prop_assert!(r.k_n1 <= r.k_n2);
        prop_assert!(r.mixed <= r.mixed_upper);
        prop_assert!(r.componentwise <= r.componentwise_upper);
        if solution.to_vector().iter().all(|&v| v != 0.0) {
            prop_assert!(r.mixed <= r.componentwise);
        }
    }

    #[test]
    fn pce_alpha_never_exceeds_norm(seed in any::<u64>(), nr in 1usize..40, nc in 1usize..40) {
        let op = SeededRng::new(seed, 0).normal_matrix(nr, nc);
        let r = pce_spectral_norm(&op, &PceOptions::default(), &mut SeededRng::new(seed, 1)).unwrap();
        let sigma = spectral_norm_dense(&op);
        prop_assert!(r.alpha <= sigma);
        prop_assert!(r.alpha <= r.estimate && r.estimate <= r.beta);
    }

    #[test]
    fn problem_json_round_trip(seed in any::<u64>(), p in 1usize..4, m in 1usize..4, n in 1usize..4) {
        let problem = random_problem(&mut SeededRng::new(seed, 0), p, m, n);
        let back = parse_problem(&to_json(&ProblemDoc::from(&problem)).unwrap()).unwrap();
        for (x, y) in back.a.iter().chain(&back.f).zip(problem.a.iter().chain(&problem.f)) {
            prop_assert!(x.iter().zip(y.iter()).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
        prop_assert_eq!(back, problem);
    }

    #[test]
    fn residual_is_linear_in_data_offset(seed in any::<u64>(), p in 1usize..3, m in 1usize..3, n in 1usize..3) {
        // Doubling E and F doubles the solution.
        let (problem, _, solution) = instance(seed, p, m, n);
        let mut doubled = problem.clone();
        for e in doubled.e.iter_mut().chain(doubled.f.iter_mut()) {
            *e *= 2.0;
        }
        let twice = PgcsSolution {
            x: solution.x.iter().map(|x| x * 2.0).collect(),
            y: solution.y.iter().map(|y| y * 2.0).collect(),
        };
        let r = residual(&doubled, &twice).unwrap();
        prop_assert!(r.max_abs() <= 1e-11 * (1.0 + twice.max_abs()));
    }
}

fn instance_from(problem: &PgcsProblem) -> (PgcsProblem, PgcsSystem, PgcsSolution) {
    let system = PgcsSystem::new(problem, DEFAULT_DENSE_CAP).unwrap();
    let solution = system.solve_vector(&problem.rhs_vector()).unwrap();
    (problem.clone(), system, solution)
}
