//! Dense direct solves, minimum-norm least squares and norm oracles.

use nalgebra::{SVD, QR};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::assembly::{build_w, AssemblyMode, LinearOperator};
use crate::model::{PgcsProblem, PgcsSolution};
use crate::{Matrix, PgcsError, Result, Vector};

/// LU factorization with partial pivoting, `P W = L U`.
#[derive(Debug, Clone)]
pub struct Factorization {
    lu: Matrix,
    swaps: Vec<usize>,
}

impl Factorization {
    /// Factors `w`; a pivot with magnitude `≤ ε · ‖W‖_∞ · order` is reported as singular.
    pub fn new(w: &Matrix) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n {
            return Err(PgcsError::dim("LU factorization", format!("square {n}x{n}"), format!("{n}x{}", w.ncols())));
        }
        let norm_inf = w.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max);
        let threshold = f64::EPSILON * norm_inf * n as f64;
        let mut lu = w.clone();
        let mut swaps = Vec::with_capacity(n);
        for k in 0..n {
            let (offset, pivot) = lu
                .view((k, k), (n - k, 1))
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |best, (i, &v)| if v.abs() > best.1 { (i, v.abs()) } else { best });
            if pivot <= threshold || pivot == 0.0 {
                return Err(PgcsError::SingularSystem { pivot: k, order: n });
            }
            let p = k + offset;
            if p != k {
                lu.swap_rows(k, p);
            }
            swaps.push(p);
            let diag = lu[(k, k)];
            for i in k + 1..n {
                lu[(i, k)] /= diag;
            }
            for j in k + 1..n {
                let ukj = lu[(k, j)];
                if ukj == 0.0 {
                    continue;
                }
                for i in k + 1..n {
                    lu[(i, j)] -= lu[(i, k)] * ukj;
                }
            }
        }
        Ok(Factorization { lu, swaps })
    }

    pub fn order(&self) -> usize {
        self.lu.nrows()
    }

    /// Solves `W x = b`.
    pub fn solve(&self, b: &Vector) -> Vector {
        let n = self.order();
        assert_eq!(b.len(), n, "LU solve dimension");
        let mut x = b.clone();
        for (k, &p) in self.swaps.iter().enumerate() {
            x.swap_rows(k, p);
        }
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for i in j + 1..n {
                    x[i] -= self.lu[(i, j)] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.lu[(j, j)];
            let xj = x[j];
            if xj != 0.0 {
                for i in 0..j {
                    x[i] -= self.lu[(i, j)] * xj;
                }
            }
        }
        x
    }

    /// Solves `Wᵀ x = b`.
    pub fn solve_transpose(&self, b: &Vector) -> Vector {
        let n = self.order();
        assert_eq!(b.len(), n, "LU transpose solve dimension");
        let mut x = b.clone();
        // Uᵀ w = b
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(j, i)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        // Lᵀ v = w
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(j, i)] * x[j]).sum();
            x[i] -= s;
        }
        for (k, &p) in self.swaps.iter().enumerate().rev() {
            x.swap_rows(k, p);
        }
        x
    }

    /// Solves `W X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            out.set_column(j, &self.solve(&b.column(j).into_owned()));
        }
        out
    }

    /// `W⁻¹`.
    pub fn inverse(&self) -> Matrix {
        self.solve_matrix(&Matrix::identity(self.order(), self.order()))
    }
}

/// A factored system matrix `W` for one problem.
#[derive(Debug, Clone)]
pub struct PgcsSystem {
    pub p: usize,
    pub m: usize,
    pub n: usize,
    w: Matrix,
    lu: Factorization,
}

impl PgcsSystem {
    /// Assembles `W` densely (subject to `cap`) and factors it.
    pub fn new(problem: &PgcsProblem, cap: usize) -> Result<Self> {
        problem.validate()?;
        let w = build_w(problem, AssemblyMode::Explicit { cap })?
            .into_dense()
            .expect("explicit assembly yields a dense matrix");
        let lu = Factorization::new(&w)?;
        Ok(PgcsSystem {
            p: problem.p,
            m: problem.m,
            n: problem.n,
            w,
            lu,
        })
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn factorization(&self) -> &Factorization {
        &self.lu
    }

    pub fn order(&self) -> usize {
        self.w.nrows()
    }

    /// Solves the PGCS equation for the right-hand side vector `g`.
    pub fn solve_vector(&self, g: &Vector) -> Result<PgcsSolution> {
        if g.len() != self.order() {
            return Err(PgcsError::dim("right-hand side", self.order(), g.len()));
        }
        PgcsSolution::from_vector(&self.lu.solve(g), self.p, self.m, self.n)
    }
}

/// `W⁻¹ M` (or `W⁻¹` alone) as an operator over a factored `W`.
///
/// Matvec is an LU solve after applying `M`; the transposed matvec applies
/// `Mᵀ` after a transposed LU solve.
pub struct InverseProduct<'a> {
    lu: &'a Factorization,
    op: Option<&'a dyn LinearOperator>,
}

impl<'a> InverseProduct<'a> {
    pub fn new(lu: &'a Factorization, op: Option<&'a dyn LinearOperator>) -> Self {
        if let Some(op) = op {
            assert_eq!(op.nrows(), lu.order(), "W⁻¹M dimension");
        }
        InverseProduct { lu, op }
    }

    /// Dense `W⁻¹ M`.
    pub fn dense(&self) -> Matrix {
        match self.op {
            Some(op) => self.lu.solve_matrix(&op.to_dense_matrix()),
            None => self.lu.inverse(),
        }
    }
}

impl LinearOperator for InverseProduct<'_> {
    fn nrows(&self) -> usize {
        self.lu.order()
    }
    fn ncols(&self) -> usize {
        self.op.map_or(self.lu.order(), |op| op.ncols())
    }
    fn apply(&self, x: &Vector) -> Vector {
        match self.op {
            Some(op) => self.lu.solve(&op.apply(x)),
            None => self.lu.solve(x),
        }
    }
    fn apply_transpose(&self, y: &Vector) -> Vector {
        let w = self.lu.solve_transpose(y);
        match self.op {
            Some(op) => op.apply_transpose(&w),
            None => w,
        }
    }
}

/// Solves `W z = g` by dense LU and unpacks `z` into `X_k`, `Y_k`.
pub fn solve_pgcs(problem: &PgcsProblem, cap: usize) -> Result<PgcsSolution> {
    let system = PgcsSystem::new(problem, cap)?;
    system.solve_vector(&problem.rhs_vector())
}

/// Minimum Euclidean norm solution of the underdetermined system `H u = r`.
///
/// Uses a thin QR factorization of `Hᵀ`; falls back to the SVD when the
/// triangular factor is poorly conditioned. Errors when the numerical rank
/// of `H` is below its row count.
pub fn min_norm_ls_solve(h: &Matrix, r: &Vector) -> Result<Vector> {
    let (rows, cols) = h.shape();
    if r.len() != rows {
        return Err(PgcsError::dim("min_norm_ls_solve", rows, r.len()));
    }
    if cols < rows {
        return Err(PgcsError::RankDeficient { rank: cols, expected: rows });
    }
    let qr = QR::new(h.transpose());
    let rfac = qr.r();
    let diag: Vec<f64> = (0..rows).map(|i| rfac[(i, i)].abs()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if dmax > 0.0 && dmin > f64::EPSILON.sqrt() * dmax {
        // H = Rᵀ Qᵀ, so u = Q R⁻ᵀ r.
        let y = rfac
            .tr_solve_upper_triangular(r)
            .ok_or(PgcsError::RankDeficient { rank: rows - 1, expected: rows })?;
        return Ok(qr.q() * y);
    }
    let svd = SVD::new(h.clone(), true, true);
    let smax = svd.singular_values.max();
    let eps = f64::EPSILON * rows.max(cols) as f64 * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    if rank < rows {
        return Err(PgcsError::RankDeficient { rank, expected: rows });
    }
    svd.solve(r, eps)
        .map_err(|msg| PgcsError::InvalidArgument { name: "h", reason: msg.to_string() })
}

/// Largest singular value via a full SVD.
pub fn spectral_norm_dense(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    // The SVD of the smaller Gram side is not used: its squaring would cost
    // half the significant digits of the smaller singular values.
    let sv = if m.nrows() >= m.ncols() {
        m.clone().singular_values()
    } else {
        m.transpose().singular_values()
    };
    sv.max()
}

/// Perron root estimate of a nonnegative matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerronEstimate {
    pub value: f64,
    /// False when no run met the convergence test; `value` is then the best estimate.
    pub converged: bool,
    pub iterations: usize,
}

pub const PERRON_TOL: f64 = 1e-8;
pub const PERRON_MAX_ITER: usize = 10_000;
const PERRON_RESTARTS: usize = 3;

/// Spectral radius of an entrywise nonnegative matrix by power iteration.
///
/// Iterates with `I + M` (primitive whenever `M` is irreducible, same Perron
/// vector) from the all-ones vector, and stops when the Collatz–Wielandt
/// bracket `min_i (Mx)_i/x_i ≤ ρ ≤ max_i (Mx)_i/x_i` closes to the relative
/// tolerance, or when the Rayleigh-type ratio `‖Mx‖₁/‖x‖₁` has been stable for
/// several iterations. Non-converged runs are retried from random positive
/// vectors.
pub fn spectral_radius_nonneg(m: &Matrix) -> Result<PerronEstimate> {
    spectral_radius_nonneg_with(m, PERRON_TOL, PERRON_MAX_ITER)
}

pub fn spectral_radius_nonneg_with(m: &Matrix, tol: f64, max_iter: usize) -> Result<PerronEstimate> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(PgcsError::dim("spectral_radius_nonneg", "square matrix", format!("{}x{}", n, m.ncols())));
    }
    if let Some(v) = m.iter().find(|v| !(**v >= 0.0)) {
        return Err(PgcsError::InvalidArgument {
            name: "m",
            reason: format!("matrix must be entrywise nonnegative, found {v}"),
        });
    }
    let mut best = perron_run(m, Vector::from_element(n, 1.0), tol, max_iter);
    if best.converged {
        return Ok(best);
    }
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(0x5eed_9e77);
    let mut total = best.iterations;
    for _ in 0..PERRON_RESTARTS {
        let start = Vector::from_fn(n, |_, _| rng.random_range(0.5..1.5));
        let run = perron_run(m, start, tol, max_iter);
        total += run.iterations;
        if run.converged {
            return Ok(PerronEstimate { iterations: total, ..run });
        }
        if run.value > best.value {
            best = run;
        }
    }
    Ok(PerronEstimate { iterations: total, ..best })
}

fn perron_run(m: &Matrix, start: Vector, tol: f64, max_iter: usize) -> PerronEstimate {
    const STABLE_STEPS: usize = 10;
    let mut x = &start / start.sum();
    let mut last_ratio = f64::NAN;
    let mut stable = 0;
    let mut estimate = 0.0;
    for it in 1..=max_iter {
        let y = m * &x;
        let ratio = y.sum();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (yi, xi) in y.iter().zip(x.iter()) {
            if *xi > f64::MIN_POSITIVE {
                let q = yi / xi;
                lo = lo.min(q);
                hi = hi.max(q);
            }
        }
        if hi <= 0.0 {
            return PerronEstimate { value: 0.0, converged: true, iterations: it };
        }
        if hi - lo <= tol * hi {
            return PerronEstimate {
                value: 0.5 * (lo + hi),
                converged: true,
                iterations: it,
            };
        }
        if (ratio - last_ratio).abs() <= tol * tol * ratio {
            stable += 1;
            if stable >= STABLE_STEPS {
                return PerronEstimate { value: ratio, converged: true, iterations: it };
            }
        } else {
            stable = 0;
        }
        last_ratio = ratio;
        estimate = ratio;
        let next = &x + y;
        x = &next / next.sum();
    }
    PerronEstimate {
        value: estimate,
        converged: false,
        iterations: max_iter,
    }
}
