//! Exact condition numbers and their cheap upper bounds.

use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{scaled_operator, LinearOperator};
use crate::estimators::{pce_spectral_norm, PceOptions};
use crate::model::{PgcsProblem, PgcsSolution, ToleranceSet};
use crate::rng::SeededRng;
use crate::solver::{spectral_norm_dense, InverseProduct, PgcsSystem};
use crate::{dense_cap_from_env, Matrix, PgcsError, Result, Vector, DEFAULT_DENSE_CAP};

/// How a reported quantity was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMethod {
    DenseExact,
    Estimated,
}

/// Policy for spectral norms of `W⁻¹`-composed operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormOptions {
    /// Dense SVD when the row order is at most this, PCE otherwise.
    pub svd_cap: usize,
    pub pce: PceOptions,
    pub seed: u64,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            svd_cap: DEFAULT_DENSE_CAP,
            pce: PceOptions::default(),
            seed: 0,
        }
    }
}

/// `‖W⁻¹M‖₂` (or `‖W⁻¹‖₂`), dense or by the PCE midpoint.
pub fn inverse_product_norm(
    system: &PgcsSystem,
    op: Option<&dyn LinearOperator>,
    opts: &NormOptions,
    stream: u64,
) -> Result<(f64, NormMethod)> {
    let prod = InverseProduct::new(system.factorization(), op);
    if system.order() <= opts.svd_cap {
        Ok((spectral_norm_dense(&prod.dense()), NormMethod::DenseExact))
    } else {
        let r = pce_spectral_norm(&prod, &opts.pce, &mut SeededRng::new(opts.seed, stream))?;
        Ok((r.estimate, NormMethod::Estimated))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionMethods {
    pub k_n1: NormMethod,
    pub k_n2: NormMethod,
    pub k_e: NormMethod,
    pub mixed: NormMethod,
    pub componentwise: NormMethod,
}

/// Normwise, effective, mixed and componentwise condition numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub k_n1: f64,
    pub k_n2: f64,
    pub k_e: f64,
    pub mixed: f64,
    pub componentwise: f64,
    pub mixed_upper: f64,
    pub componentwise_upper: f64,
    pub methods: ConditionMethods,
    /// Tolerances entering `k_N1`.
    pub tolerances: ToleranceSet,
}

/// `c_i = a_i / b_i` when `b_i ≠ 0`, otherwise `c_i = a_i`.
pub fn entrywise_divide(a: &Vector, b: &Vector) -> Result<Vector> {
    if a.len() != b.len() {
        return Err(PgcsError::dim("entrywise_divide", a.len(), b.len()));
    }
    Ok(Vector::from_fn(a.len(), |i, _| if b[i] != 0.0 { a[i] / b[i] } else { a[i] }))
}

/// `ω = |W⁻¹H₂| |t|`, accumulated over the `6p` data blocks.
///
/// Each block contributes `|W⁻¹ · slab| · |vec(block)|`, where the slab is the
/// nonzero part of the matching columns of `H₂`; slabs are materialized one at
/// a time and summed in block order.
pub fn omega(system: &PgcsSystem, problem: &PgcsProblem, solution: &PgcsSolution) -> Result<Vector> {
    let h2 = scaled_operator(problem, solution, &ToleranceSet::unit(problem.p))?;
    let order = system.order();
    let mn = problem.m * problem.n;
    let lu = system.factorization();
    let terms: Vec<Vector> = (0..6 * problem.p)
        .into_par_iter()
        .map(|idx| {
            let (k, b) = (idx / 6, idx % 6);
            let slab = h2.dense_block(k, b);
            let mut cols = Matrix::zeros(order, slab.ncols());
            cols.view_mut((h2.block_row(k, b), 0), (mn, slab.ncols())).copy_from(&slab);
            let data = problem.blocks(k)[b];
            let abs_data = Vector::from_iterator(data.len(), data.iter().map(|v| v.abs()));
            lu.solve_matrix(&cols).abs() * abs_data
        })
        .collect();
    let mut w = Vector::zeros(order);
    for t in &terms {
        w += t;
    }
    Ok(w)
}

/// Stack of `|A_k||X_k| + |Y_k||B_k| + |E_k|` and `|C_k||X_{k+1}| + |Y_k||D_k| + |F_k|`.
fn magnitude_stack(problem: &PgcsProblem, solution: &PgcsSolution) -> f64 {
    let mut top = 0.0f64;
    for k in 0..problem.p {
        let y = solution.y[k].abs();
        let first = problem.a[k].abs() * solution.x[k].abs() + &y * problem.b[k].abs() + problem.e[k].abs();
        let second =
            problem.c[k].abs() * solution.x_cyclic(k + 1).abs() + &y * problem.d[k].abs() + problem.f[k].abs();
        top = top.max(first.amax()).max(second.amax());
    }
    top
}

fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max)
}

/// Upper bounds `(mixed_upper, componentwise_upper)`.
pub fn condition_upper_bounds(system: &PgcsSystem, problem: &PgcsProblem, solution: &PgcsSolution) -> Result<(f64, f64)> {
    solution.check_shape(problem, "condition upper bounds")?;
    let winv = system.factorization().inverse();
    let z = solution.to_vector();
    let stack = magnitude_stack(problem, solution);
    let mixed_upper = inf_norm(&winv) / z.amax() * stack;
    let mut scaled = winv;
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        if z[i] != 0.0 {
            row /= z[i];
        }
    }
    Ok((mixed_upper, inf_norm(&scaled) * stack))
}

/// Condition numbers for a problem and its exact solution; factors `W` under `PGCS_DENSE_CAP`.
pub fn condition_numbers(
    problem: &PgcsProblem,
    solution: &PgcsSolution,
    tolerances: &ToleranceSet,
    opts: &NormOptions,
) -> Result<ConditionReport> {
    let system = PgcsSystem::new(problem, dense_cap_from_env())?;
    condition_numbers_with(&system, problem, solution, tolerances, opts)
}

/// [`condition_numbers`] reusing a factored system.
pub fn condition_numbers_with(
    system: &PgcsSystem,
    problem: &PgcsProblem,
    solution: &PgcsSolution,
    tolerances: &ToleranceSet,
    opts: &NormOptions,
) -> Result<ConditionReport> {
    solution.check_shape(problem, "condition numbers")?;
    let znorm = solution.frobenius_norm();
    let h1 = scaled_operator(problem, solution, tolerances)?;
    let h2 = scaled_operator(problem, solution, &ToleranceSet::unit(problem.p))?;
    let (n1, m1) = inverse_product_norm(system, Some(&h1), opts, 0)?;
    let (n2, m2) = inverse_product_norm(system, Some(&h2), opts, 1)?;
    let (ne, me) = inverse_product_norm(system, None, opts, 2)?;

    let w = omega(system, problem, solution)?;
    let z = solution.to_vector();
    let mixed = w.amax() / z.amax();
    let componentwise = entrywise_divide(&w, &z)?.amax();
    let (mixed_upper, componentwise_upper) = condition_upper_bounds(system, problem, solution)?;
    Ok(ConditionReport {
        k_n1: n1 / znorm,
        k_n2: n2 * problem.data_norm_squared().sqrt() / znorm,
        k_e: ne * problem.rhs_vector().norm() / znorm,
        mixed,
        componentwise,
        mixed_upper,
        componentwise_upper,
        methods: ConditionMethods {
            k_n1: m1,
            k_n2: m2,
            k_e: me,
            mixed: NormMethod::DenseExact,
            componentwise: NormMethod::DenseExact,
        },
        tolerances: tolerances.clone(),
    })
}
