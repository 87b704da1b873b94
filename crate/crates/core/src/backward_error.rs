//! Normwise backward error bracket of a candidate solution.

use crate::assembly::scaled_operator;
use crate::assembly::unpack_perturbation_vector;
use crate::model::{residual, PerturbationSet, PgcsProblem, PgcsSolution, ToleranceSet};
use crate::solver::min_norm_ls_solve;
use crate::{Result, Vector};

/// Bounds `‖Ĥ†r‖₂/√(6p) ≤ η ≤ ‖Ĥ†r‖₂` and the perturbation attaining the upper one.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardErrorReport {
    pub lower: f64,
    pub upper: f64,
    /// `u = Ĥ†r` unpacked, each block multiplied back by its tolerance.
    pub attaining_perturbation: PerturbationSet,
    /// The scaled minimum-norm vector `u` itself.
    pub scaled_vector: Vector,
    pub residual_norm: f64,
}

/// Backward error bracket for `candidate` under `tolerances`.
///
/// Requires the explicit `Ĥ` (row order `2mnp`) within `cap`.
pub fn backward_error_bounds(
    problem: &PgcsProblem,
    candidate: &PgcsSolution,
    tolerances: &ToleranceSet,
    cap: usize,
) -> Result<BackwardErrorReport> {
    problem.validate()?;
    let h = scaled_operator(problem, candidate, tolerances)?.to_dense(cap)?;
    let r = residual(problem, candidate)?.to_vector();
    let u = min_norm_ls_solve(&h, &r)?;
    let upper = u.norm();
    let lower = upper / ((6 * problem.p) as f64).sqrt();
    let attaining_perturbation = unpack_perturbation_vector(&u, tolerances, problem.p, problem.m, problem.n)?;
    Ok(BackwardErrorReport {
        lower,
        upper,
        attaining_perturbation,
        scaled_vector: u,
        residual_norm: r.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{pack_perturbation_vector, LinearOperator};
    use crate::model::tests::{patterned_problem, scalar_problem};
    use crate::model::{apply_perturbation, default_tolerances};
    use crate::solver::solve_pgcs;
    use crate::DEFAULT_DENSE_CAP;

    fn noisy(sol: &PgcsSolution, scale: f64) -> PgcsSolution {
        let mut out = sol.clone();
        for (i, m) in out.x.iter_mut().chain(out.y.iter_mut()).enumerate() {
            for (j, v) in m.iter_mut().enumerate() {
                *v += scale * ((i * 31 + j * 7) as f64 * 0.37).sin();
            }
        }
        out
    }

    #[test]
    fn exact_solution_has_zero_backward_error() {
        let prob = patterned_problem(2, 3, 2);
        let sol = solve_pgcs(&prob, DEFAULT_DENSE_CAP).unwrap();
        let tol = default_tolerances(&prob).unwrap();
        let rep = backward_error_bounds(&prob, &sol, &tol, DEFAULT_DENSE_CAP).unwrap();
        assert!(rep.upper <= 1e-12, "{}", rep.upper);
        assert!(rep.lower <= rep.upper);
    }

    #[test]
    fn scalar_zero_candidate() {
        // Ĥ = [[0, 0, -1, 0, 0, 0], [0, 0, 0, 0, 0, -1]] with unit tolerances, r = [1, 2].
        let prob = scalar_problem();
        let rep = backward_error_bounds(&prob, &PgcsSolution::zeros(1, 1, 1), &ToleranceSet::unit(1), DEFAULT_DENSE_CAP)
            .unwrap();
        assert!((rep.upper - 5f64.sqrt()).abs() < 1e-14);
        assert!((rep.lower - 5f64.sqrt() / 6f64.sqrt()).abs() < 1e-14);
        assert!((rep.attaining_perturbation.de[0][(0, 0)] + 1.0).abs() < 1e-14);
        assert!((rep.attaining_perturbation.df[0][(0, 0)] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn ratio_is_sqrt_6p() {
        for p in 1..=3 {
            let prob = patterned_problem(p, 2, 2);
            let sol = noisy(&solve_pgcs(&prob, DEFAULT_DENSE_CAP).unwrap(), 1e-3);
            let tol = default_tolerances(&prob).unwrap();
            let rep = backward_error_bounds(&prob, &sol, &tol, DEFAULT_DENSE_CAP).unwrap();
            let ratio = rep.lower / rep.upper;
            assert!((ratio - 1.0 / ((6 * p) as f64).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn attaining_perturbation_makes_candidate_exact() {
        let prob = patterned_problem(3, 3, 2);
        let sol = noisy(&solve_pgcs(&prob, DEFAULT_DENSE_CAP).unwrap(), 1e-6);
        let tol = default_tolerances(&prob).unwrap();
        let rep = backward_error_bounds(&prob, &sol, &tol, DEFAULT_DENSE_CAP).unwrap();
        assert!(rep.upper >= 1e-8 && rep.upper <= 1e-4, "{}", rep.upper);
        let h = scaled_operator(&prob, &sol, &tol).unwrap();
        let r = residual(&prob, &sol).unwrap().to_vector();
        assert!((h.apply(&rep.scaled_vector) - &r).norm() <= 1e-11 * r.norm());
        // The candidate's residual in the perturbed problem is r - Ĥu.
        let perturbed = apply_perturbation(&prob, &rep.attaining_perturbation).unwrap();
        let scale = 1.0 + sol.max_abs();
        assert!(residual(&perturbed, &sol).unwrap().max_abs() <= 1e-10 * scale);
    }

    #[test]
    fn alternative_feasible_perturbations_are_larger() {
        let prob = patterned_problem(1, 2, 2);
        let sol = noisy(&solve_pgcs(&prob, DEFAULT_DENSE_CAP).unwrap(), 1e-3);
        let tol = default_tolerances(&prob).unwrap();
        let rep = backward_error_bounds(&prob, &sol, &tol, DEFAULT_DENSE_CAP).unwrap();
        let h = scaled_operator(&prob, &sol, &tol).unwrap().to_dense(DEFAULT_DENSE_CAP).unwrap();
        let pinv = h.clone().pseudo_inverse(1e-14).unwrap();
        let proj = crate::Matrix::identity(h.ncols(), h.ncols()) - &pinv * &h;
        let mut rng = crate::rng::SeededRng::new(5, 0);
        for _ in 0..50 {
            let alt = &rep.scaled_vector + &proj * rng.normal_vector(h.ncols()) * 1e-3;
            assert!(alt.norm() >= rep.upper * (1.0 - 1e-12));
        }
    }

    #[test]
    fn doubling_tolerances_halves_bounds() {
        let prob = patterned_problem(2, 2, 3);
        let sol = noisy(&solve_pgcs(&prob, DEFAULT_DENSE_CAP).unwrap(), 1e-4);
        let tol = default_tolerances(&prob).unwrap();
        let a = backward_error_bounds(&prob, &sol, &tol, DEFAULT_DENSE_CAP).unwrap();
        let b = backward_error_bounds(&prob, &sol, &tol.scaled(2.0), DEFAULT_DENSE_CAP).unwrap();
        assert!((b.upper - a.upper / 2.0).abs() <= 1e-13 * a.upper);
        assert!((b.lower - a.lower / 2.0).abs() <= 1e-13 * a.lower);
        assert!((&b.scaled_vector - &a.scaled_vector / 2.0).norm() <= 1e-13 * a.upper);
        // The unscaled attaining perturbation is unchanged.
        let ua = pack_perturbation_vector(&a.attaining_perturbation, &ToleranceSet::unit(2)).unwrap();
        let ub = pack_perturbation_vector(&b.attaining_perturbation, &ToleranceSet::unit(2)).unwrap();
        assert!((ua - ub).norm() <= 1e-13 * (1.0 + a.upper));
    }
}
