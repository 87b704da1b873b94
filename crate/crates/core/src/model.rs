//! Problem data, candidate solutions, perturbations, tolerances and residuals.
//!
//! Period indices are 0-based in code; diagnostics report them 1-based.
//! Within a period the six data blocks are always ordered `(A, B, E, C, D, F)`.

use crate::error::Issue;
use crate::kron::vectorize;
use crate::{Matrix, PgcsError, Result, Vector};

/// Names of the six data blocks in canonical order.
pub const BLOCK_NAMES: [&str; 6] = ["A", "B", "E", "C", "D", "F"];

/// Shape of data block `b` (canonical order) for dimensions `m`, `n`.
pub fn block_shape(b: usize, m: usize, n: usize) -> (usize, usize) {
    match b % 3 {
        0 => (m, m),
        1 => (n, n),
        _ => (m, n),
    }
}

/// Number of scalar data entries per period, `2(m² + n² + mn)`.
pub fn data_len_per_period(m: usize, n: usize) -> usize {
    2 * (m * m + n * n + m * n)
}

/// The coefficient bundle of a PGCS equation with period `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PgcsProblem {
    pub p: usize,
    pub m: usize,
    pub n: usize,
    pub a: Vec<Matrix>,
    pub b: Vec<Matrix>,
    pub c: Vec<Matrix>,
    pub d: Vec<Matrix>,
    pub e: Vec<Matrix>,
    pub f: Vec<Matrix>,
}

impl PgcsProblem {
    /// Builds a problem, inferring `p`, `m`, `n` from `a` and `b`, and validates it.
    pub fn new(
        a: Vec<Matrix>,
        b: Vec<Matrix>,
        c: Vec<Matrix>,
        d: Vec<Matrix>,
        e: Vec<Matrix>,
        f: Vec<Matrix>,
    ) -> Result<Self> {
        let p = a.len();
        let m = a.first().map_or(0, |x| x.nrows());
        let n = b.first().map_or(0, |x| x.nrows());
        let problem = PgcsProblem { p, m, n, a, b, c, d, e, f };
        problem.validate()?;
        Ok(problem)
    }

    /// Order of the Kronecker system, `2mnp`.
    pub fn order(&self) -> usize {
        2 * self.m * self.n * self.p
    }

    /// Length of the data vector, `q = 2p(m² + n² + mn)`.
    pub fn data_len(&self) -> usize {
        self.p * data_len_per_period(self.m, self.n)
    }

    /// The six data blocks of period `k` in canonical `(A, B, E, C, D, F)` order.
    pub fn blocks(&self, k: usize) -> [&Matrix; 6] {
        [&self.a[k], &self.b[k], &self.e[k], &self.c[k], &self.d[k], &self.f[k]]
    }

    fn families(&self) -> [(&'static str, &Vec<Matrix>); 6] {
        [
            ("A", &self.a),
            ("B", &self.b),
            ("E", &self.e),
            ("C", &self.c),
            ("D", &self.d),
            ("F", &self.f),
        ]
    }

    /// Checks every shape and finiteness invariant, reporting all violations.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if self.p == 0 {
            issues.push(issue("p", "period must be at least 1"));
        }
        if self.m == 0 || self.n == 0 {
            issues.push(issue("m,n", "dimensions must be at least 1"));
        }
        for (b, (name, family)) in self.families().into_iter().enumerate() {
            check_family(&mut issues, name, family, self.p, block_shape(b, self.m, self.n));
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(PgcsError::Invalid(issues))
        }
    }

    /// Right-hand side `g = vec([E_1, F_1, ..., E_p, F_p])`.
    pub fn rhs_vector(&self) -> Vector {
        let mn = self.m * self.n;
        let mut g = Vector::zeros(self.order());
        for k in 0..self.p {
            g.rows_mut(2 * k * mn, mn).copy_from_slice(self.e[k].as_slice());
            g.rows_mut((2 * k + 1) * mn, mn).copy_from_slice(self.f[k].as_slice());
        }
        g
    }

    /// `Σ_k ‖A_k‖_F² + ... + ‖F_k‖_F²`, the squared norm of the data vector.
    pub fn data_norm_squared(&self) -> f64 {
        self.families()
            .iter()
            .flat_map(|(_, fam)| fam.iter())
            .map(|m| m.norm_squared())
            .sum()
    }
}

fn issue(field: impl Into<String>, message: impl Into<String>) -> Issue {
    Issue {
        field: field.into(),
        message: message.into(),
    }
}

fn check_family(
    issues: &mut Vec<Issue>,
    name: &str,
    family: &[Matrix],
    p: usize,
    shape: (usize, usize),
) {
    if family.len() != p {
        issues.push(issue(name, format!("expected {p} matrices, found {}", family.len())));
    }
    for (k, m) in family.iter().enumerate() {
        let field = format!("{name}[{}]", k + 1);
        if m.shape() != shape {
            issues.push(issue(
                field.clone(),
                format!("expected shape {}x{}, found {}x{}", shape.0, shape.1, m.nrows(), m.ncols()),
            ));
        }
        if m.iter().any(|v| !v.is_finite()) {
            issues.push(issue(field, "contains a non-finite entry"));
        }
    }
}

/// The unknowns `X_k`, `Y_k`, `k = 1..p`, with `X_{p+1} = X_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PgcsSolution {
    pub x: Vec<Matrix>,
    pub y: Vec<Matrix>,
}

impl PgcsSolution {
    pub fn zeros(p: usize, m: usize, n: usize) -> Self {
        PgcsSolution {
            x: vec![Matrix::zeros(m, n); p],
            y: vec![Matrix::zeros(m, n); p],
        }
    }

    pub fn period(&self) -> usize {
        self.x.len()
    }

    /// `X_k` with cyclic indexing, so `x_cyclic(p) == x[0]`.
    pub fn x_cyclic(&self, k: usize) -> &Matrix {
        &self.x[k % self.x.len()]
    }

    /// `z = vec([X_1, Y_1, ..., X_p, Y_p])`.
    pub fn to_vector(&self) -> Vector {
        let blocks: Vec<&Matrix> = self.x.iter().zip(&self.y).flat_map(|(x, y)| [x, y]).collect();
        let len = blocks.iter().map(|b| b.len()).sum();
        let mut z = Vector::zeros(len);
        let mut off = 0;
        for b in blocks {
            z.rows_mut(off, b.len()).copy_from_slice(b.as_slice());
            off += b.len();
        }
        z
    }

    /// Inverse of [`to_vector`](Self::to_vector).
    pub fn from_vector(z: &Vector, p: usize, m: usize, n: usize) -> Result<Self> {
        let mn = m * n;
        if z.len() != 2 * mn * p {
            return Err(PgcsError::dim("solution vector", 2 * mn * p, z.len()));
        }
        let s = z.as_slice();
        let block = |i: usize| Matrix::from_column_slice(m, n, &s[i * mn..(i + 1) * mn]);
        Ok(PgcsSolution {
            x: (0..p).map(|k| block(2 * k)).collect(),
            y: (0..p).map(|k| block(2 * k + 1)).collect(),
        })
    }

    /// `‖[X_1, Y_1, ..., X_p, Y_p]‖_F`.
    pub fn frobenius_norm(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.y)
            .map(|m| m.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// `‖[X_1, Y_1, ..., X_p, Y_p]‖_max`, the largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.y)
            .flat_map(|m| m.iter())
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub(crate) fn check_shape(&self, problem: &PgcsProblem, context: &'static str) -> Result<()> {
        let (p, m, n) = (problem.p, problem.m, problem.n);
        if self.x.len() != p || self.y.len() != p {
            return Err(PgcsError::dim(context, format!("{p} periods"), self.x.len().min(self.y.len())));
        }
        for mat in self.x.iter().chain(&self.y) {
            if mat.shape() != (m, n) {
                return Err(PgcsError::dim(
                    context,
                    format!("{m}x{n}"),
                    format!("{}x{}", mat.nrows(), mat.ncols()),
                ));
            }
        }
        Ok(())
    }
}

/// Weights `α_k, β_k, γ_k, ζ_k, τ_k, δ_k` measuring perturbations of
/// `A_k, B_k, E_k, C_k, D_k, F_k`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ToleranceSet {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub zeta: Vec<f64>,
    pub tau: Vec<f64>,
    pub delta: Vec<f64>,
}

impl ToleranceSet {
    /// All tolerances equal to one.
    pub fn unit(p: usize) -> Self {
        Self::constant(p, 1.0)
    }

    pub fn constant(p: usize, value: f64) -> Self {
        let v = vec![value; p];
        ToleranceSet {
            alpha: v.clone(),
            beta: v.clone(),
            gamma: v.clone(),
            zeta: v.clone(),
            tau: v.clone(),
            delta: v,
        }
    }

    /// Tolerances of period `k` in canonical `(A, B, E, C, D, F)` order.
    pub fn family(&self, k: usize) -> [f64; 6] {
        [
            self.alpha[k],
            self.beta[k],
            self.gamma[k],
            self.zeta[k],
            self.tau[k],
            self.delta[k],
        ]
    }

    /// Multiplies every tolerance by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let f = |v: &Vec<f64>| v.iter().map(|x| x * s).collect();
        ToleranceSet {
            alpha: f(&self.alpha),
            beta: f(&self.beta),
            gamma: f(&self.gamma),
            zeta: f(&self.zeta),
            tau: f(&self.tau),
            delta: f(&self.delta),
        }
    }

    /// Checks the period count and strict positivity of every entry.
    pub fn validate(&self, p: usize) -> Result<()> {
        let named = [
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("zeta", &self.zeta),
            ("tau", &self.tau),
            ("delta", &self.delta),
        ];
        for (name, values) in named {
            if values.len() != p {
                return Err(PgcsError::dim("tolerance set", format!("{p} entries in {name}"), values.len()));
            }
            for (k, &v) in values.iter().enumerate() {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(PgcsError::NonPositiveTolerance {
                        field: format!("{name}[{}]", k + 1),
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Perturbations `ΔA_k, ..., ΔF_k` of the coefficient bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSet {
    pub da: Vec<Matrix>,
    pub db: Vec<Matrix>,
    pub dc: Vec<Matrix>,
    pub dd: Vec<Matrix>,
    pub de: Vec<Matrix>,
    pub df: Vec<Matrix>,
}

impl PerturbationSet {
    pub fn zeros(p: usize, m: usize, n: usize) -> Self {
        PerturbationSet {
            da: vec![Matrix::zeros(m, m); p],
            db: vec![Matrix::zeros(n, n); p],
            dc: vec![Matrix::zeros(m, m); p],
            dd: vec![Matrix::zeros(n, n); p],
            de: vec![Matrix::zeros(m, n); p],
            df: vec![Matrix::zeros(m, n); p],
        }
    }

    /// The perturbation with every block equal to the matching problem block.
    pub fn from_problem(problem: &PgcsProblem) -> Self {
        PerturbationSet {
            da: problem.a.clone(),
            db: problem.b.clone(),
            dc: problem.c.clone(),
            dd: problem.d.clone(),
            de: problem.e.clone(),
            df: problem.f.clone(),
        }
    }

    pub fn blocks(&self, k: usize) -> [&Matrix; 6] {
        [&self.da[k], &self.db[k], &self.de[k], &self.dc[k], &self.dd[k], &self.df[k]]
    }

    pub fn blocks_mut(&mut self, k: usize) -> [&mut Matrix; 6] {
        [
            &mut self.da[k],
            &mut self.db[k],
            &mut self.de[k],
            &mut self.dc[k],
            &mut self.dd[k],
            &mut self.df[k],
        ]
    }

    pub fn period(&self) -> usize {
        self.da.len()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let f = |v: &Vec<Matrix>| v.iter().map(|m| m * s).collect();
        PerturbationSet {
            da: f(&self.da),
            db: f(&self.db),
            dc: f(&self.dc),
            dd: f(&self.dd),
            de: f(&self.de),
            df: f(&self.df),
        }
    }

    /// `vec([ΔE_1, ΔF_1, ..., ΔE_p, ΔF_p])`.
    pub fn rhs_vector(&self) -> Vector {
        let parts: Vec<&Matrix> = self.de.iter().zip(&self.df).flat_map(|(e, f)| [e, f]).collect();
        let len = parts.iter().map(|b| b.len()).sum();
        let mut g = Vector::zeros(len);
        let mut off = 0;
        for b in parts {
            g.rows_mut(off, b.len()).copy_from_slice(b.as_slice());
            off += b.len();
        }
        g
    }

    /// Interprets this set as a coefficient bundle (shape checks included).
    pub fn as_problem(&self, m: usize, n: usize) -> Result<PgcsProblem> {
        let problem = PgcsProblem {
            p: self.period(),
            m,
            n,
            a: self.da.clone(),
            b: self.db.clone(),
            c: self.dc.clone(),
            d: self.dd.clone(),
            e: self.de.clone(),
            f: self.df.clone(),
        };
        problem.validate()?;
        Ok(problem)
    }

    pub(crate) fn check_shape(&self, problem: &PgcsProblem) -> Result<()> {
        let mut issues = Vec::new();
        let (p, m, n) = (problem.p, problem.m, problem.n);
        let named = [
            ("dA", &self.da),
            ("dB", &self.db),
            ("dE", &self.de),
            ("dC", &self.dc),
            ("dD", &self.dd),
            ("dF", &self.df),
        ];
        for (b, (name, family)) in named.into_iter().enumerate() {
            check_family(&mut issues, name, family, p, block_shape(b, m, n));
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(PgcsError::Invalid(issues))
        }
    }
}

/// Residual blocks `R_{k1}`, `R_{k2}` of a candidate solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub r1: Vec<Matrix>,
    pub r2: Vec<Matrix>,
}

impl ResidualSet {
    /// `r = vec([R_11, R_12, ..., R_p1, R_p2])`.
    pub fn to_vector(&self) -> Vector {
        let sol = PgcsSolution {
            x: self.r1.clone(),
            y: self.r2.clone(),
        };
        sol.to_vector()
    }

    pub fn max_abs(&self) -> f64 {
        self.r1
            .iter()
            .chain(&self.r2)
            .flat_map(|m| m.iter())
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Validates a problem; alias of [`PgcsProblem::validate`].
pub fn validate(problem: &PgcsProblem) -> Result<()> {
    problem.validate()
}

/// `R_{k1} = E_k - (A_k X_k - Y_k B_k)`, `R_{k2} = F_k - (C_k X_{k+1} - Y_k D_k)`.
pub fn residual(problem: &PgcsProblem, candidate: &PgcsSolution) -> Result<ResidualSet> {
    candidate.check_shape(problem, "residual")?;
    let mut r1 = Vec::with_capacity(problem.p);
    let mut r2 = Vec::with_capacity(problem.p);
    for k in 0..problem.p {
        let y = &candidate.y[k];
        r1.push(&problem.e[k] - (&problem.a[k] * &candidate.x[k] - y * &problem.b[k]));
        r2.push(&problem.f[k] - (&problem.c[k] * candidate.x_cyclic(k + 1) - y * &problem.d[k]));
    }
    Ok(ResidualSet { r1, r2 })
}

/// Frobenius-norm tolerances `α_k = ‖A_k‖_F`, ..., `δ_k = ‖F_k‖_F`.
pub fn default_tolerances(problem: &PgcsProblem) -> Result<ToleranceSet> {
    let norms = |name: &str, fam: &[Matrix]| -> Result<Vec<f64>> {
        fam.iter()
            .enumerate()
            .map(|(k, m)| {
                let v = m.norm();
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(PgcsError::ZeroTolerance {
                        field: format!("{name}[{}]", k + 1),
                    })
                }
            })
            .collect()
    };
    Ok(ToleranceSet {
        alpha: norms("A", &problem.a)?,
        beta: norms("B", &problem.b)?,
        gamma: norms("E", &problem.e)?,
        zeta: norms("C", &problem.c)?,
        tau: norms("D", &problem.d)?,
        delta: norms("F", &problem.f)?,
    })
}

/// The perturbed bundle `A_k + ΔA_k, ..., F_k + ΔF_k`.
pub fn apply_perturbation(problem: &PgcsProblem, delta: &PerturbationSet) -> Result<PgcsProblem> {
    delta.check_shape(problem)?;
    let add = |x: &[Matrix], dx: &[Matrix]| x.iter().zip(dx).map(|(a, b)| a + b).collect();
    Ok(PgcsProblem {
        p: problem.p,
        m: problem.m,
        n: problem.n,
        a: add(&problem.a, &delta.da),
        b: add(&problem.b, &delta.db),
        c: add(&problem.c, &delta.dc),
        d: add(&problem.d, &delta.dd),
        e: add(&problem.e, &delta.de),
        f: add(&problem.f, &delta.df),
    })
}

/// Row-stacked `vec` images of a list of matrices.
pub(crate) fn concat_vecs<'a>(mats: impl IntoIterator<Item = &'a Matrix>) -> Vector {
    let parts: Vec<Vector> = mats.into_iter().map(vectorize).collect();
    let len = parts.iter().map(|v| v.len()).sum();
    let mut out = Vector::zeros(len);
    let mut off = 0;
    for v in parts {
        out.rows_mut(off, v.len()).copy_from(&v);
        off += v.len();
    }
    out
}
