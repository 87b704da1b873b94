mod common;

use common::*;
use pgcs_core::assembly::{build_scaled_operator, build_w, AssemblyMode, LinearOperator};
use pgcs_core::backward_error::backward_error_bounds;
use pgcs_core::conditioning::{condition_numbers_with, NormMethod, NormOptions};
use pgcs_core::estimators::{pce_condition_numbers, sce_condition_numbers, PceOptions, WallisMode};
use pgcs_core::experiments::{run_table1, TABLE1_REFERENCE};
use pgcs_core::model::default_tolerances;
use pgcs_core::perturbation::{componentwise_bounds, normwise_bounds, perturbed_solution_change};
use pgcs_core::rng::SeededRng;
use pgcs_core::solver::{solve_pgcs, spectral_norm_dense, PgcsSystem};
use pgcs_core::{Matrix, PgcsError, PgcsProblem, PgcsSolution, ToleranceSet, DEFAULT_DENSE_CAP};

fn scalar() -> PgcsProblem {
    let s = |v: f64| vec![Matrix::from_element(1, 1, v)];
    PgcsProblem::new(s(2.0), s(1.0), s(1.0), s(3.0), s(1.0), s(2.0)).unwrap()
}

#[test]
fn scalar_fixture_solution() {
    let sol = solve_pgcs(&scalar(), DEFAULT_DENSE_CAP).unwrap();
    assert!((sol.x[0][(0, 0)] - 0.2).abs() < 1e-15);
    assert!((sol.y[0][(0, 0)] + 0.6).abs() < 1e-15);
}

#[test]
fn table1_spot_values() {
    let r = run_table1(3, 3).unwrap();
    for (got, want) in [(r.k_e, 182.1423), (r.mixed, 18.1240), (r.componentwise, 120.0864)] {
        assert!((got - want).abs() / want < 1e-3, "{got} vs {want}");
    }
    let r = run_table1(5, 5).unwrap();
    assert!((r.k_n1 - 1.3438e3).abs() / 1.3438e3 < 1e-3);
    assert!(matches!(run_table1(2, 1), Err(PgcsError::InvalidArgument { .. })));
    assert_eq!(TABLE1_REFERENCE.len(), 6);
}

#[test]
fn explicit_and_implicit_system_agree() {
    let mut rng = SeededRng::new(11, 0);
    for _ in 0..10 {
        let (p, m, n) = random_shape(&mut rng, 120);
        let pr = random_problem(&mut rng, p, m, n);
        let oracle = oracle_w_problem(&pr);
        let explicit = build_w(&pr, AssemblyMode::explicit()).unwrap().into_dense().unwrap();
        let implicit = build_w(&pr, AssemblyMode::Implicit).unwrap().to_dense_matrix();
        assert!(rel_diff(&explicit, &oracle) <= 1e-14);
        assert!(rel_diff(&implicit, &oracle) <= 1e-14);
        let sol = solve_pgcs(&pr, DEFAULT_DENSE_CAP).unwrap();
        let tol = default_tolerances(&pr).unwrap();
        let h = build_scaled_operator(&pr, &sol, &tol, AssemblyMode::explicit()).unwrap();
        assert!(rel_diff(h.dense().unwrap(), &oracle_h(&pr, &sol, &tol)) <= 1e-14);
    }
}

#[test]
fn size_cap_is_enforced() {
    let pr = random_problem(&mut SeededRng::new(1, 0), 2, 3, 3);
    assert!(matches!(
        build_w(&pr, AssemblyMode::Explicit { cap: 35 }),
        Err(PgcsError::SizeCap { order: 36, cap: 35 })
    ));
    assert!(build_w(&pr, AssemblyMode::Explicit { cap: 36 }).is_ok());
}

#[test]
fn library_delta_z_matches_dense_oracle() {
    let mut rng = SeededRng::new(12, 0);
    for _ in 0..20 {
        let (p, m, n) = random_shape(&mut rng, 60);
        let pr = random_problem(&mut rng, p, m, n);
        let sol = solve_pgcs(&pr, DEFAULT_DENSE_CAP).unwrap();
        let tol = default_tolerances(&pr).unwrap();
        let d = scaled_perturbation(&mut rng, &pr, &tol, 1e-5);
        let lib = perturbed_solution_change(&pr, &sol, &d, DEFAULT_DENSE_CAP).unwrap();
        let oracle = oracle_delta_z(&pr, &sol, &d);
        assert!((&lib - &oracle).norm() <= 1e-10 * oracle.norm());
    }
}

#[test]
fn bounds_order_and_first_order_limit() {
    let mut rng = SeededRng::new(13, 0);
    let pr = random_problem(&mut rng, 2, 3, 2);
    let system = PgcsSystem::new(&pr, DEFAULT_DENSE_CAP).unwrap();
    let sol = system.solve_vector(&pr.rhs_vector()).unwrap();
    let tol = default_tolerances(&pr).unwrap();
    let d = scaled_perturbation(&mut rng, &pr, &tol, 1e-6);
    let nw = normwise_bounds(&system, &pr, &sol, &d, &tol, &NormOptions::default()).unwrap();
    assert!(nw.applicable);
    assert!((nw.epsilon - 1e-6).abs() < 1e-18);
    assert!(nw.rigorous_normwise_direct <= nw.rigorous_normwise);
    assert!(nw.rigorous_normwise <= nw.rigorous_normwise_eps);
    assert!(nw.first_order_normwise <= nw.rigorous_normwise_eps);
    let cw = componentwise_bounds(&system, &pr, &sol, &d, &tol).unwrap();
    for (f, r) in cw.first_order_componentwise.iter().zip(&cw.rigorous_componentwise) {
        assert!(f <= r);
    }
    let dz = oracle_delta_z(&pr, &sol, &d);
    assert!(dz.norm() <= nw.rigorous_normwise);
}

#[test]
fn inapplicable_bounds_are_infinite() {
    let pr = scalar();
    let system = PgcsSystem::new(&pr, DEFAULT_DENSE_CAP).unwrap();
    let sol = system.solve_vector(&pr.rhs_vector()).unwrap();
    let tol = ToleranceSet::unit(1);
    let mut d = pgcs_core::PerturbationSet::zeros(1, 1, 1);
    d.da[0][(0, 0)] = -2.5;
    let nw = normwise_bounds(&system, &pr, &sol, &d, &tol, &NormOptions::default()).unwrap();
    assert!(!nw.applicable && nw.rigorous_normwise.is_infinite());
    let cw = componentwise_bounds(&system, &pr, &sol, &d, &tol).unwrap();
    assert!(!cw.applicable);
    assert!(cw.rigorous_componentwise.iter().all(|v| v.is_infinite()));
    let json = pgcs_core::io::to_json(&nw).unwrap();
    assert!(json.contains("\"rigorous_normwise\": null"));
}

#[test]
fn estimated_norms_track_exact_ones() {
    let pr = random_problem(&mut SeededRng::new(14, 0), 3, 3, 2);
    let system = PgcsSystem::new(&pr, DEFAULT_DENSE_CAP).unwrap();
    let sol = system.solve_vector(&pr.rhs_vector()).unwrap();
    let tol = default_tolerances(&pr).unwrap();
    let exact = condition_numbers_with(&system, &pr, &sol, &tol, &NormOptions::default()).unwrap();
    let forced = NormOptions { svd_cap: 0, ..NormOptions::default() };
    let est = condition_numbers_with(&system, &pr, &sol, &tol, &forced).unwrap();
    assert_eq!(est.methods.k_n1, NormMethod::Estimated);
    for (a, b) in [(exact.k_n1, est.k_n1), (exact.k_n2, est.k_n2), (exact.k_e, est.k_e)] {
        assert!((a - b).abs() <= 0.011 * a, "{a} vs {b}");
    }
    let pce = pce_condition_numbers(&system, &pr, &sol, &tol, &PceOptions::default(), 7, 0).unwrap();
    assert!(pce.normwise.alpha <= exact.k_n1 * sol.frobenius_norm() * (1.0 + 1e-12));
    assert!((pce.k_pce_e - exact.k_e).abs() <= 0.011 * exact.k_e);
}

#[test]
fn sce_full_sample_recovers_row_norms() {
    // With s = q the directions form an orthonormal basis, so the estimate is exact in the 2-norm.
    let pr = random_problem(&mut SeededRng::new(15, 0), 1, 1, 1);
    let system = PgcsSystem::new(&pr, DEFAULT_DENSE_CAP).unwrap();
    let sol = system.solve_vector(&pr.rhs_vector()).unwrap();
    let q = 6;
    let r = sce_condition_numbers(&system, &pr, &sol, q, 3, WallisMode::Exact).unwrap();
    let h2 = build_scaled_operator(&pr, &sol, &ToleranceSet::unit(1), AssemblyMode::explicit()).unwrap();
    let t = pgcs_core::assembly::pack_data_vector(&pr);
    let m = system.factorization().inverse() * h2.dense().unwrap() * Matrix::from_diagonal(&t);
    for (i, k) in r.kappa_abs.iter().enumerate() {
        let row = m.row(i).norm();
        assert!((k - row).abs() <= 1e-10 * row.max(1.0), "{k} vs {row}");
    }
}

#[test]
fn backward_error_uses_tolerance_weights() {
    let pr = scalar();
    let zero = PgcsSolution::zeros(1, 1, 1);
    let unit = backward_error_bounds(&pr, &zero, &ToleranceSet::unit(1), DEFAULT_DENSE_CAP).unwrap();
    let heavy = backward_error_bounds(&pr, &zero, &ToleranceSet::constant(1, 4.0), DEFAULT_DENSE_CAP).unwrap();
    assert!((unit.upper - 5f64.sqrt()).abs() < 1e-14);
    assert!((heavy.upper - 5f64.sqrt() / 4.0).abs() < 1e-14);
}

#[test]
fn spectral_norm_of_known_matrix() {
    let m = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 4.0, 5.0]);
    assert!((spectral_norm_dense(&m) - 45f64.sqrt()).abs() < 1e-13);
}
