//! Rigorous and first-order perturbation bounds for `Δz`.
//!
//! With `H₁` built from the exact solution and `u` the tolerance-scaled
//! perturbation vector, the perturbed solution satisfies
//! `W Δz = −H₁u − ΔW Δz`, which yields both the normwise and the
//! componentwise bounds below.

use serde::Serialize;

use crate::assembly::{build_delta_w, pack_perturbation_vector, scaled_operator, AssemblyMode, LinearOperator};
use crate::conditioning::{inverse_product_norm, NormMethod, NormOptions};
use crate::model::{PerturbationSet, PgcsProblem, PgcsSolution, ToleranceSet};
use crate::solver::{spectral_radius_nonneg, Factorization, InverseProduct, PgcsSystem};
use crate::{Matrix, Result, Vector};

/// Normwise bounds on `‖Δz‖₂`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationBoundReport {
    /// `‖W⁻¹ΔW‖₂`.
    pub contraction_norm: f64,
    /// `‖W⁻¹H₁‖₂`.
    pub inverse_h1_norm: f64,
    /// `‖W⁻¹H₁‖₂ ‖u‖₂ / (1 − ‖W⁻¹ΔW‖₂)`.
    pub rigorous_normwise: f64,
    /// `‖W⁻¹H₁u‖₂ / (1 − ‖W⁻¹ΔW‖₂)`, never larger than `rigorous_normwise`.
    pub rigorous_normwise_direct: f64,
    /// `√(6p) ‖W⁻¹H₁‖₂ ε / (1 − ‖W⁻¹ΔW‖₂)`.
    pub rigorous_normwise_eps: f64,
    /// Largest tolerance-scaled Frobenius norm over the `6p` perturbation blocks.
    pub epsilon: f64,
    /// `√(6p) ‖W⁻¹H₁‖₂ ε`.
    pub first_order_normwise: f64,
    /// `‖W⁻¹ΔW‖₂ < 1`; otherwise the rigorous bounds are `+∞`.
    pub applicable: bool,
    pub contraction_method: NormMethod,
    pub inverse_h1_method: NormMethod,
}

/// Entrywise bounds on `|Δz|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentwiseBoundReport {
    /// Perron root of `|W⁻¹ΔW|`.
    pub perron_radius: f64,
    pub perron_converged: bool,
    /// `(I − |W⁻¹ΔW|)⁻¹ |W⁻¹H₁u|`, or `+∞` entries when not applicable.
    pub rigorous_componentwise: Vec<f64>,
    /// `|W⁻¹H₁u|`.
    pub first_order_componentwise: Vec<f64>,
    pub applicable: bool,
}

/// `max` over periods and blocks of `‖ΔM‖_F / tol(M)`.
pub fn scaled_epsilon(delta: &PerturbationSet, tolerances: &ToleranceSet) -> Result<f64> {
    tolerances.validate(delta.period())?;
    let mut eps = 0.0f64;
    for k in 0..delta.period() {
        for (blk, t) in delta.blocks(k).into_iter().zip(tolerances.family(k)) {
            eps = eps.max(blk.norm() / t);
        }
    }
    Ok(eps)
}

fn check_inputs(problem: &PgcsProblem, solution: &PgcsSolution, delta: &PerturbationSet) -> Result<()> {
    problem.validate()?;
    solution.check_shape(problem, "perturbation bounds")?;
    delta.check_shape(problem)
}

/// Normwise bounds for the exact solution `solution` of `problem`.
pub fn normwise_bounds(
    system: &PgcsSystem,
    problem: &PgcsProblem,
    solution: &PgcsSolution,
    delta: &PerturbationSet,
    tolerances: &ToleranceSet,
    opts: &NormOptions,
) -> Result<PerturbationBoundReport> {
    check_inputs(problem, solution, delta)?;
    let dw = build_delta_w(delta, problem.m, problem.n, AssemblyMode::Implicit)?;
    let h1 = scaled_operator(problem, solution, tolerances)?;
    let (c, c_method) = inverse_product_norm(system, Some(&dw), opts, 3)?;
    let (nh, nh_method) = inverse_product_norm(system, Some(&h1), opts, 0)?;
    let u = pack_perturbation_vector(delta, tolerances)?;
    let direct = system.factorization().solve(&h1.apply(&u)).norm();
    let epsilon = scaled_epsilon(delta, tolerances)?;
    let root = ((6 * problem.p) as f64).sqrt();
    let applicable = c < 1.0;
    let over = |v: f64| if applicable { v / (1.0 - c) } else { f64::INFINITY };
    Ok(PerturbationBoundReport {
        contraction_norm: c,
        inverse_h1_norm: nh,
        rigorous_normwise: over(nh * u.norm()),
        rigorous_normwise_direct: over(direct),
        rigorous_normwise_eps: over(root * nh * epsilon),
        epsilon,
        first_order_normwise: root * nh * epsilon,
        applicable,
        contraction_method: c_method,
        inverse_h1_method: nh_method,
    })
}

/// Componentwise bounds; needs the dense `|W⁻¹ΔW|`.
pub fn componentwise_bounds(
    system: &PgcsSystem,
    problem: &PgcsProblem,
    solution: &PgcsSolution,
    delta: &PerturbationSet,
    tolerances: &ToleranceSet,
) -> Result<ComponentwiseBoundReport> {
    check_inputs(problem, solution, delta)?;
    let lu = system.factorization();
    let dw = build_delta_w(delta, problem.m, problem.n, AssemblyMode::Implicit)?;
    let m = InverseProduct::new(lu, Some(&dw)).dense().abs();
    let perron = spectral_radius_nonneg(&m)?;
    let h1 = scaled_operator(problem, solution, tolerances)?;
    let u = pack_perturbation_vector(delta, tolerances)?;
    let first = lu.solve(&h1.apply(&u)).abs();
    let applicable = perron.value < 1.0;
    let rigorous = if applicable {
        let n = m.nrows();
        Factorization::new(&(Matrix::identity(n, n) - &m))?.solve(&first)
    } else {
        Vector::from_element(first.len(), f64::INFINITY)
    };
    Ok(ComponentwiseBoundReport {
        perron_radius: perron.value,
        perron_converged: perron.converged,
        rigorous_componentwise: rigorous.iter().cloned().collect(),
        first_order_componentwise: first.iter().cloned().collect(),
        applicable,
    })
}

/// `Δz = z̃ − z` for the perturbed problem, computed as `(W + ΔW)⁻¹(−H₁u)`.
///
/// Solving for the difference directly avoids the cancellation in `z̃ − z`.
pub fn perturbed_solution_change(
    problem: &PgcsProblem,
    solution: &PgcsSolution,
    delta: &PerturbationSet,
    cap: usize,
) -> Result<Vector> {
    check_inputs(problem, solution, delta)?;
    let perturbed = crate::model::apply_perturbation(problem, delta)?;
    let system = PgcsSystem::new(&perturbed, cap)?;
    let unit = ToleranceSet::unit(problem.p);
    let h1 = scaled_operator(problem, solution, &unit)?;
    let u = pack_perturbation_vector(delta, &unit)?;
    Ok(system.factorization().solve(&-h1.apply(&u)))
}
