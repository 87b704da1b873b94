//! Randomized condition estimators.
//!
//! * PCE brackets an operator 2-norm with a certified lower bound and a
//!   probabilistic upper bound from Golub–Kahan–Lanczos bidiagonalization.
//! * SCE estimates the mixed and componentwise condition numbers from a few
//!   orthonormal random directional derivatives of the solution map.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::assembly::{block_columns, LinearOperator};
use crate::conditioning::entrywise_divide;
use crate::model::{block_shape, data_len_per_period, PgcsProblem, PgcsSolution, ToleranceSet};
use crate::rng::SeededRng;
use crate::solver::{InverseProduct, PgcsSystem};
use crate::{Matrix, PgcsError, Result, Vector};

/// Exact product formula or the asymptotic approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WallisMode {
    Exact,
    Approx,
}

/// Wallis factor `ω_p = E|gᵀz| / ‖g‖₂` for `z` uniform on the unit sphere in `R^p`.
pub fn wallis(p: usize, mode: WallisMode) -> Result<f64> {
    if p == 0 {
        return Err(PgcsError::InvalidArgument {
            name: "p",
            reason: "Wallis factor needs p >= 1".into(),
        });
    }
    Ok(match mode {
        WallisMode::Approx => (2.0 / (std::f64::consts::PI * (p as f64 - 0.5))).sqrt(),
        WallisMode::Exact if p == 1 => 1.0,
        WallisMode::Exact if p % 2 == 1 => {
            // (1·3···(p−2)) / (2·4···(p−1))
            (1..p).step_by(2).map(|i| i as f64 / (i + 1) as f64).product()
        }
        WallisMode::Exact => {
            // (2/π) · (2·4···(p−2)) / (3·5···(p−1))
            let tail: f64 = (2..p - 1).step_by(2).map(|i| i as f64 / (i + 1) as f64).product();
            2.0 / std::f64::consts::PI * tail
        }
    })
}

/// Parameters of the probabilistic spectral-norm bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PceOptions {
    /// Probability that `beta` fails to bound the norm.
    pub eps_prob: f64,
    /// Target relative gap `beta/alpha ≤ 1 + delta_gap`.
    pub delta_gap: f64,
    pub max_iter: usize,
}

impl Default for PceOptions {
    fn default() -> Self {
        PceOptions {
            eps_prob: 0.001,
            delta_gap: 0.01,
            max_iter: 300,
        }
    }
}

impl PceOptions {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("eps_prob", self.eps_prob), ("delta_gap", self.delta_gap)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(PgcsError::InvalidArgument {
                    name,
                    reason: format!("must lie in (0, 1), got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Bracket `alpha ≤ ‖op‖₂ ≤ beta` (the upper bound with probability `1 − eps_prob`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PceResult {
    pub alpha: f64,
    pub beta: f64,
    pub estimate: f64,
    pub eps_prob: f64,
    pub delta_gap: f64,
    pub iterations: usize,
    /// False when `max_iter` was reached before the gap closed.
    pub converged: bool,
    /// True when the Krylov space became invariant, making the bracket exact up to rounding.
    pub exhausted: bool,
}

/// `δ` with `P(|v₁ᵀx| ≤ δ) = eps` for `v₁` uniform on the unit sphere in `R^n` and fixed unit `x`.
///
/// `(v₁ᵀx)²` is `Beta(1/2, (n−1)/2)`; the quantile is found by bisection.
pub fn start_vector_threshold(n: usize, eps: f64) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    let b = (n as f64 - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(0.5, b, mid) < eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    lo.sqrt()
}

/// Largest singular value of the upper bidiagonal matrix with the given diagonal and superdiagonal.
fn bidiagonal_singular_values(diag: &[f64], sup: &[f64]) -> Vector {
    let k = diag.len();
    let mut b = Matrix::zeros(k, k);
    for i in 0..k {
        b[(i, i)] = diag[i];
        if i + 1 < k {
            b[(i, i + 1)] = sup[i];
        }
    }
    b.singular_values()
}

/// Largest `t > θ_max²` with `log p_k(t) = log(1/δ)`, where
/// `p_k(t) = ∏(t − θ_i²) / ∏ b_j` is the Lanczos polynomial of `opᵀop`.
fn polynomial_upper_bound(theta_sq: &[f64], log_b_prod: f64, log_target: f64) -> f64 {
    let top = theta_sq.iter().cloned().fold(0.0, f64::max);
    let f = |t: f64| theta_sq.iter().map(|th| (t - th).ln()).sum::<f64>() - log_b_prod - log_target;
    let scale = top.max(f64::MIN_POSITIVE);
    let mut lo = top;
    let mut hi = top + scale;
    while f(hi) < 0.0 {
        lo = hi;
        hi = top + 2.0 * (hi - top);
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    hi
}

fn orthogonalize(v: &mut Vector, basis: &[Vector]) {
    // Two classical Gram–Schmidt sweeps keep the basis orthonormal to working precision.
    for _ in 0..2 {
        for q in basis {
            let c = q.dot(v);
            v.axpy(-c, q, 1.0);
        }
    }
}

/// Brackets `‖op‖₂` by Golub–Kahan–Lanczos bidiagonalization with full
/// reorthogonalization from a start vector uniform on the unit sphere.
///
/// `alpha` is the largest singular value of the projected bidiagonal matrix,
/// deflated by a rounding margin so that it stays a lower bound in floating
/// point. `beta` inverts the Lanczos polynomial bound: with probability
/// `1 − eps_prob` the start vector's component along the top right singular
/// vector exceeds the `eps_prob` quantile `δ`, and then `p_k(σ_max²) ≤ 1/δ`.
pub fn pce_spectral_norm(op: &dyn LinearOperator, opts: &PceOptions, rng: &mut SeededRng) -> Result<PceResult> {
    opts.validate()?;
    let (nr, nc) = (op.nrows(), op.ncols());
    if nr == 0 || nc == 0 {
        return Err(PgcsError::InvalidArgument {
            name: "op",
            reason: "operator has an empty dimension".into(),
        });
    }
    let log_target = -start_vector_threshold(nc, opts.eps_prob).ln();
    let margin = 8.0 * (nr.max(nc) + opts.max_iter) as f64 * f64::EPSILON;
    let bracket = |sigma: f64, upper: f64, iterations, converged, exhausted| {
        let alpha = sigma * (1.0 - margin);
        let beta = (upper * (1.0 + margin)).max(alpha);
        PceResult {
            alpha,
            beta,
            estimate: 0.5 * (alpha + beta),
            eps_prob: opts.eps_prob,
            delta_gap: opts.delta_gap,
            iterations,
            converged,
            exhausted,
        }
    };

    let mut vs: Vec<Vector> = vec![rng.unit_sphere(nc)];
    let mut us: Vec<Vector> = Vec::new();
    let mut diag: Vec<f64> = Vec::new();
    let mut sup: Vec<f64> = Vec::new();
    let mut log_b_prod = 0.0;
    let mut scale = 0.0f64;
    let mut min_upper = f64::INFINITY;

    for k in 1..=opts.max_iter {
        // α_k u_k = A v_k − β_{k−1} u_{k−1}
        let mut pvec = op.apply(vs.last().unwrap());
        if let (Some(u), Some(&b)) = (us.last(), sup.last()) {
            pvec.axpy(-b, u, 1.0);
        }
        orthogonalize(&mut pvec, &us);
        let a_k = pvec.norm();
        scale = scale.max(a_k);
        let tiny = 64.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        if a_k <= tiny {
            // span(V_k) is invariant under AᵀA.
            diag.push(0.0);
            let sigma = bidiagonal_singular_values(&diag, &sup).max();
            return Ok(bracket(sigma, sigma, k, true, true));
        }
        diag.push(a_k);
        us.push(pvec / a_k);

        // β_k v_{k+1} = Aᵀ u_k − α_k v_k
        let mut r = op.apply_transpose(us.last().unwrap());
        r.axpy(-a_k, vs.last().unwrap(), 1.0);
        orthogonalize(&mut r, &vs);
        let b_k = r.norm();
        scale = scale.max(b_k);
        let sv = bidiagonal_singular_values(&diag, &sup);
        let sigma = sv.max();
        if b_k <= tiny || vs.len() == nc {
            return Ok(bracket(sigma, sigma, k, true, true));
        }
        // Off-diagonal of the Lanczos tridiagonal BᵀB.
        log_b_prod += (a_k * b_k).ln();
        let theta_sq: Vec<f64> = sv.iter().map(|s| s * s).collect();
        let upper = polynomial_upper_bound(&theta_sq, log_b_prod, log_target).sqrt();
        min_upper = min_upper.min(upper);
        if min_upper <= (1.0 + opts.delta_gap) * sigma * (1.0 - margin) / (1.0 + margin) {
            return Ok(bracket(sigma, min_upper, k, true, false));
        }
        sup.push(b_k);
        vs.push(r / b_k);
    }
    let sigma = bidiagonal_singular_values(&diag, &sup[..diag.len() - 1]).max();
    Ok(bracket(sigma, min_upper.max(sigma), opts.max_iter, false, false))
}

/// PCE estimates of the normwise and effective condition numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PceConditionReport {
    pub k_pce_n1: f64,
    pub k_pce_e: f64,
    /// Bracket of `‖W⁻¹H₁‖₂`.
    pub normwise: PceResult,
    /// Bracket of `‖W⁻¹‖₂`.
    pub effective: PceResult,
    pub seed: u64,
}

/// Applies PCE to `W⁻¹H₁` and `W⁻¹` and forms `k_pceN1`, `k_pceE`.
///
/// Streams `stream` and `stream + 1` of `seed` drive the two start vectors.
pub fn pce_condition_numbers(
    system: &PgcsSystem,
    problem: &PgcsProblem,
    solution: &PgcsSolution,
    tolerances: &ToleranceSet,
    opts: &PceOptions,
    seed: u64,
    stream: u64,
) -> Result<PceConditionReport> {
    let h1 = crate::assembly::scaled_operator(problem, solution, tolerances)?;
    let lu = system.factorization();
    let normwise = pce_spectral_norm(&InverseProduct::new(lu, Some(&h1)), opts, &mut SeededRng::new(seed, stream))?;
    let effective = pce_spectral_norm(&InverseProduct::new(lu, None), opts, &mut SeededRng::new(seed, stream.wrapping_add(1)))?;
    let znorm = solution.frobenius_norm();
    Ok(PceConditionReport {
        k_pce_n1: normwise.estimate / znorm,
        k_pce_e: effective.estimate * problem.rhs_vector().norm() / znorm,
        normwise,
        effective,
        seed,
    })
}

/// Output of the small-sample statistical estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceResult {
    pub mixed_est: f64,
    pub componentwise_est: f64,
    pub samples: usize,
    pub kappa_abs: Vec<f64>,
    pub seed: u64,
    pub wallis: WallisMode,
}

const DIRECTION_DRAWS: usize = 4;

/// `s` orthonormal standard-normal directions in `R^q` (columns of the result).
///
/// Modified Gram–Schmidt with one reorthogonalization pass; the whole set is
/// redrawn (up to three times) when a direction loses numerical rank.
pub fn sce_directions(q: usize, s: usize, rng: &mut SeededRng) -> Result<Matrix> {
    if s == 0 || s > q {
        return Err(PgcsError::InvalidArgument {
            name: "s",
            reason: format!("sample count must lie in 1..={q}, got {s}"),
        });
    }
    let mut rank = 0;
    for _ in 0..DIRECTION_DRAWS {
        let mut basis = rng.normal_matrix(q, s);
        rank = 0;
        for j in 0..s {
            let mut v = basis.column(j).into_owned();
            let before = v.norm();
            for _ in 0..2 {
                for i in 0..j {
                    let c = basis.column(i).dot(&v);
                    v.axpy(-c, &basis.column(i).into_owned(), 1.0);
                }
            }
            let after = v.norm();
            if !(after > 1e-10 * before) {
                break;
            }
            basis.set_column(j, &(v / after));
            rank += 1;
        }
        if rank == s {
            return Ok(basis);
        }
    }
    Err(PgcsError::DegenerateDirections { rank, expected: s })
}

/// Small-sample statistical estimates of the mixed and componentwise condition numbers.
///
/// Each direction `p_j` is unpacked into a bundle `(R, L, M, S, N, Q)` aligned
/// with `(A, B, E, C, D, F)`, multiplied entrywise by the data, and the
/// directional derivative `u_j` solves the PGCS equation with right-hand sides
/// `M_k − (R_k X_k − Y_k L_k)` and `Q_k − (S_k X_{k+1} − Y_k N_k)`. Then
/// `κ_abs = (ω_s/ω_q) · sqrt(Σ_j u_j²)` componentwise.
pub fn sce_condition_numbers(
    system: &PgcsSystem,
    problem: &PgcsProblem,
    solution: &PgcsSolution,
    s: usize,
    seed: u64,
    wallis_mode: WallisMode,
) -> Result<SceResult> {
    let mut rng = SeededRng::new(seed, 0);
    sce_with_rng(system, problem, solution, s, &mut rng, wallis_mode).map(|mut r| {
        r.seed = seed;
        r
    })
}

/// [`sce_condition_numbers`] drawing from a caller-positioned stream.
pub fn sce_with_rng(
    system: &PgcsSystem,
    problem: &PgcsProblem,
    solution: &PgcsSolution,
    s: usize,
    rng: &mut SeededRng,
    wallis_mode: WallisMode,
) -> Result<SceResult> {
    let (p, m, n) = (problem.p, problem.m, problem.n);
    let q = p * data_len_per_period(m, n);
    let directions = sce_directions(q, s, rng)?;
    let t = crate::assembly::pack_data_vector(problem);
    let lu = system.factorization();

    let derivatives: Vec<Vector> = (0..s)
        .into_par_iter()
        .map(|j| {
            let d = directions.column(j).component_mul(&t);
            let bundle = |k: usize, b: usize| {
                let (r, c) = block_shape(b, m, n);
                Matrix::from_column_slice(r, c, &d.as_slice()[block_columns(k, b, m, n)])
            };
            let mut rhs = Vec::with_capacity(2 * p);
            for k in 0..p {
                let (rk, lk, mk, sk, nk, qk) = (bundle(k, 0), bundle(k, 1), bundle(k, 2), bundle(k, 3), bundle(k, 4), bundle(k, 5));
                let y = &solution.y[k];
                rhs.push(mk - (rk * &solution.x[k] - y * lk));
                rhs.push(qk - (sk * solution.x_cyclic(k + 1) - y * nk));
            }
            lu.solve(&crate::model::concat_vecs(rhs.iter()))
        })
        .collect();

    let factor = wallis(s, wallis_mode)? / wallis(q, wallis_mode)?;
    let mut sq = Vector::zeros(system.order());
    for u in &derivatives {
        sq += u.component_mul(u);
    }
    let kappa = sq.map(|v| factor * v.sqrt());
    let z = solution.to_vector();
    let zmax = z.amax();
    let ratios = entrywise_divide(&kappa, &z)?;
    Ok(SceResult {
        mixed_est: kappa.amax() / zmax,
        componentwise_est: ratios.amax(),
        samples: s,
        kappa_abs: kappa.iter().cloned().collect(),
        seed: 0,
        wallis: wallis_mode,
    })
}
