//! Structured operators of the Kronecker formulation.
//!
//! * `W`: the `2mnp`-square system matrix of `W z = g` (also `ΔW` when built
//!   from a perturbation set).
//! * `Ĥ` / `H₁` / `H₂`: the `2mnp × q` scaled data operator, block diagonal
//!   over periods, mapping tolerance-scaled data perturbations `u` to their
//!   first-order effect on the equations.
//!
//! Each operator exists in an implicit form (matvec and transposed matvec
//! through `vec(AXC) = (Cᵀ ⊗ A) vec(X)`) and an explicit dense form built
//! from Kronecker blocks, gated by a size cap.

use crate::kron::{kronecker, left, right, unvectorize_slice, vectorize};
use crate::model::{block_shape, data_len_per_period, PerturbationSet, PgcsProblem, PgcsSolution, ToleranceSet};
use crate::{Matrix, PgcsError, Result, Vector, DEFAULT_DENSE_CAP};

/// A real linear map with matvec and transposed matvec.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = M x`; panics when `x.len() != ncols()`.
    fn apply(&self, x: &Vector) -> Vector;
    /// `x = Mᵀ y`; panics when `y.len() != nrows()`.
    fn apply_transpose(&self, y: &Vector) -> Vector;

    /// Dense image of the identity, one matvec per column.
    fn to_dense_matrix(&self) -> Matrix {
        let mut out = Matrix::zeros(self.nrows(), self.ncols());
        let mut e = Vector::zeros(self.ncols());
        for j in 0..self.ncols() {
            e[j] = 1.0;
            out.set_column(j, &self.apply(&e));
            e[j] = 0.0;
        }
        out
    }
}

impl LinearOperator for Matrix {
    fn nrows(&self) -> usize {
        self.nrows()
    }
    fn ncols(&self) -> usize {
        self.ncols()
    }
    fn apply(&self, x: &Vector) -> Vector {
        self * x
    }
    fn apply_transpose(&self, y: &Vector) -> Vector {
        self.tr_mul(y)
    }
}

/// Whether operators are materialized densely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssemblyMode {
    /// Dense matrix, refused when the row order exceeds `cap`.
    Explicit { cap: usize },
    /// Matvec closures over the problem data.
    Implicit,
}

impl AssemblyMode {
    pub fn explicit() -> Self {
        AssemblyMode::Explicit { cap: DEFAULT_DENSE_CAP }
    }
}

pub(crate) fn check_cap(order: usize, cap: usize) -> Result<()> {
    if order > cap {
        Err(PgcsError::SizeCap { order, cap })
    } else {
        Ok(())
    }
}

/// Implicit form of `W` (or `ΔW`) holding the four coefficient families.
#[derive(Debug, Clone)]
pub struct SystemOperator {
    p: usize,
    m: usize,
    n: usize,
    a: Vec<Matrix>,
    b: Vec<Matrix>,
    c: Vec<Matrix>,
    d: Vec<Matrix>,
    at: Vec<Matrix>,
    bt: Vec<Matrix>,
    ct: Vec<Matrix>,
    dt: Vec<Matrix>,
}

impl SystemOperator {
    fn new(p: usize, m: usize, n: usize, a: &[Matrix], b: &[Matrix], c: &[Matrix], d: &[Matrix]) -> Self {
        let tr = |v: &[Matrix]| v.iter().map(|x| x.transpose()).collect();
        SystemOperator {
            p,
            m,
            n,
            a: a.to_vec(),
            b: b.to_vec(),
            c: c.to_vec(),
            d: d.to_vec(),
            at: tr(a),
            bt: tr(b),
            ct: tr(c),
            dt: tr(d),
        }
    }

    /// Dense Kronecker-block construction.
    pub fn to_dense(&self, cap: usize) -> Result<Matrix> {
        let (p, m, n) = (self.p, self.m, self.n);
        let mn = m * n;
        let order = 2 * mn * p;
        check_cap(order, cap)?;
        let im = Matrix::identity(m, m);
        let inn = Matrix::identity(n, n);
        let mut w = Matrix::zeros(order, order);
        let mut add = |row: usize, col: usize, block: Matrix| {
            let mut v = w.view_mut((row * mn, col * mn), (mn, mn));
            v += block;
        };
        for k in 0..p {
            let xk = 2 * k;
            let yk = 2 * k + 1;
            let xnext = 2 * ((k + 1) % p);
            add(2 * k, xk, kronecker(&inn, &self.a[k]));
            add(2 * k, yk, -kronecker(&self.bt[k], &im));
            add(2 * k + 1, yk, -kronecker(&self.dt[k], &im));
            add(2 * k + 1, xnext, kronecker(&inn, &self.c[k]));
        }
        Ok(w)
    }
}

impl LinearOperator for SystemOperator {
    fn nrows(&self) -> usize {
        2 * self.m * self.n * self.p
    }
    fn ncols(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, z: &Vector) -> Vector {
        assert_eq!(z.len(), self.ncols(), "W matvec dimension");
        let (p, m, n) = (self.p, self.m, self.n);
        let mn = m * n;
        let s = z.as_slice();
        let blk = |i: usize| &s[i * mn..(i + 1) * mn];
        let mut out = Vector::zeros(z.len());
        for k in 0..p {
            let x = blk(2 * k);
            let y = blk(2 * k + 1);
            let xn = blk(2 * ((k + 1) % p));
            let r1 = left(&self.a[k], x, n) - right(y, m, &self.b[k]);
            let r2 = left(&self.c[k], xn, n) - right(y, m, &self.d[k]);
            out.rows_mut(2 * k * mn, mn).copy_from_slice(r1.as_slice());
            out.rows_mut((2 * k + 1) * mn, mn).copy_from_slice(r2.as_slice());
        }
        out
    }

    fn apply_transpose(&self, w: &Vector) -> Vector {
        assert_eq!(w.len(), self.nrows(), "W^T matvec dimension");
        let (p, m, n) = (self.p, self.m, self.n);
        let mn = m * n;
        let s = w.as_slice();
        let blk = |i: usize| &s[i * mn..(i + 1) * mn];
        let mut out = Vector::zeros(w.len());
        for k in 0..p {
            let w1 = blk(2 * k);
            let w2 = blk(2 * k + 1);
            let prev = (k + p - 1) % p;
            let xk = left(&self.at[k], w1, n) + left(&self.ct[prev], blk(2 * prev + 1), n);
            let yk = -(right(w1, m, &self.bt[k]) + right(w2, m, &self.dt[k]));
            out.rows_mut(2 * k * mn, mn).copy_from_slice(xk.as_slice());
            out.rows_mut((2 * k + 1) * mn, mn).copy_from_slice(yk.as_slice());
        }
        out
    }
}

/// `W` or `ΔW` in either representation.
#[derive(Debug, Clone)]
pub enum BigSystemMatrix {
    Explicit(Matrix),
    Implicit(SystemOperator),
}

impl BigSystemMatrix {
    pub fn dense(&self) -> Option<&Matrix> {
        match self {
            BigSystemMatrix::Explicit(m) => Some(m),
            BigSystemMatrix::Implicit(_) => None,
        }
    }

    pub fn into_dense(self) -> Option<Matrix> {
        match self {
            BigSystemMatrix::Explicit(m) => Some(m),
            BigSystemMatrix::Implicit(_) => None,
        }
    }
}

impl LinearOperator for BigSystemMatrix {
    fn nrows(&self) -> usize {
        match self {
            BigSystemMatrix::Explicit(m) => m.nrows(),
            BigSystemMatrix::Implicit(op) => op.nrows(),
        }
    }
    fn ncols(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &Vector) -> Vector {
        match self {
            BigSystemMatrix::Explicit(m) => m * x,
            BigSystemMatrix::Implicit(op) => op.apply(x),
        }
    }
    fn apply_transpose(&self, y: &Vector) -> Vector {
        match self {
            BigSystemMatrix::Explicit(m) => m.tr_mul(y),
            BigSystemMatrix::Implicit(op) => op.apply_transpose(y),
        }
    }
}

fn finish_system(op: SystemOperator, mode: AssemblyMode) -> Result<BigSystemMatrix> {
    match mode {
        AssemblyMode::Implicit => Ok(BigSystemMatrix::Implicit(op)),
        AssemblyMode::Explicit { cap } => Ok(BigSystemMatrix::Explicit(op.to_dense(cap)?)),
    }
}

/// The system matrix `W` of `W z = g`.
pub fn build_w(problem: &PgcsProblem, mode: AssemblyMode) -> Result<BigSystemMatrix> {
    let op = SystemOperator::new(problem.p, problem.m, problem.n, &problem.a, &problem.b, &problem.c, &problem.d);
    finish_system(op, mode)
}

/// `ΔW`: the structure of `W` with the perturbations of `A, B, C, D` substituted.
pub fn build_delta_w(delta: &PerturbationSet, m: usize, n: usize, mode: AssemblyMode) -> Result<BigSystemMatrix> {
    let p = delta.period();
    let op = SystemOperator::new(p, m, n, &delta.da, &delta.db, &delta.dc, &delta.dd);
    finish_system(op, mode)
}

/// Implicit `Ĥ` (candidate solution), `H₁` (exact solution) or `H₂` (unit tolerances).
#[derive(Debug, Clone)]
pub struct ScaledDataOperator {
    p: usize,
    m: usize,
    n: usize,
    x: Vec<Matrix>,
    y: Vec<Matrix>,
    xt: Vec<Matrix>,
    yt: Vec<Matrix>,
    tol: Vec<[f64; 6]>,
}

impl ScaledDataOperator {
    pub fn period(&self) -> usize {
        self.p
    }

    /// Column range of data block `b` of period `k` in the data vector.
    pub fn block_columns(&self, k: usize, b: usize) -> std::ops::Range<usize> {
        block_columns(k, b, self.m, self.n)
    }

    /// Dense Kronecker-block construction.
    pub fn to_dense(&self, cap: usize) -> Result<Matrix> {
        let (p, m, n) = (self.p, self.m, self.n);
        let mn = m * n;
        let rows = 2 * mn * p;
        check_cap(rows, cap)?;
        let mut h = Matrix::zeros(rows, p * data_len_per_period(m, n));
        for k in 0..p {
            for b in 0..6 {
                let block = self.dense_block(k, b);
                let row = (2 * k + b / 3) * mn;
                let cols = self.block_columns(k, b);
                h.view_mut((row, cols.start), (mn, cols.len())).copy_from(&block);
            }
        }
        Ok(h)
    }

    /// The nonzero `mn × (block size)` slab of the columns for data block `b` of period `k`,
    /// located in row block `2k + b/3`.
    pub fn dense_block(&self, k: usize, b: usize) -> Matrix {
        let (m, n) = (self.m, self.n);
        let t = self.tol[k][b];
        let im = Matrix::identity(m, m);
        let inn = Matrix::identity(n, n);
        match b {
            0 => kronecker(&self.xt[k], &im) * t,
            3 => kronecker(&self.xt[(k + 1) % self.p], &im) * t,
            1 | 4 => kronecker(&inn, &self.y[k]) * -t,
            _ => Matrix::identity(m * n, m * n) * -t,
        }
    }

    /// Row offset of the slab returned by [`dense_block`](Self::dense_block).
    pub fn block_row(&self, k: usize, b: usize) -> usize {
        (2 * k + b / 3) * self.m * self.n
    }
}

/// Column range of data block `b` (canonical order) of period `k`.
pub fn block_columns(k: usize, b: usize, m: usize, n: usize) -> std::ops::Range<usize> {
    let mut start = k * data_len_per_period(m, n);
    for prev in 0..b {
        let (r, c) = block_shape(prev, m, n);
        start += r * c;
    }
    let (r, c) = block_shape(b, m, n);
    start..start + r * c
}

impl LinearOperator for ScaledDataOperator {
    fn nrows(&self) -> usize {
        2 * self.m * self.n * self.p
    }
    fn ncols(&self) -> usize {
        self.p * data_len_per_period(self.m, self.n)
    }

    fn apply(&self, u: &Vector) -> Vector {
        assert_eq!(u.len(), self.ncols(), "H matvec dimension");
        let (p, m, n) = (self.p, self.m, self.n);
        let mn = m * n;
        let s = u.as_slice();
        let mut out = Vector::zeros(self.nrows());
        for k in 0..p {
            let seg = |b: usize| &s[self.block_columns(k, b)];
            let t = self.tol[k];
            let xn = &self.x[(k + 1) % p];
            let mut r1 = right(seg(0), m, &self.x[k]) * t[0] - left(&self.y[k], seg(1), n) * t[1];
            r1 -= Matrix::from_column_slice(m, n, seg(2)) * t[2];
            let mut r2 = right(seg(3), m, xn) * t[3] - left(&self.y[k], seg(4), n) * t[4];
            r2 -= Matrix::from_column_slice(m, n, seg(5)) * t[5];
            out.rows_mut(2 * k * mn, mn).copy_from_slice(r1.as_slice());
            out.rows_mut((2 * k + 1) * mn, mn).copy_from_slice(r2.as_slice());
        }
        out
    }

    fn apply_transpose(&self, w: &Vector) -> Vector {
        assert_eq!(w.len(), self.nrows(), "H^T matvec dimension");
        let (p, m, n) = (self.p, self.m, self.n);
        let mn = m * n;
        let s = w.as_slice();
        let mut out = Vector::zeros(self.ncols());
        for k in 0..p {
            let w1 = &s[2 * k * mn..(2 * k + 1) * mn];
            let w2 = &s[(2 * k + 1) * mn..(2 * k + 2) * mn];
            let t = self.tol[k];
            let xnt = &self.xt[(k + 1) % p];
            let parts: [Matrix; 6] = [
                right(w1, m, &self.xt[k]) * t[0],
                left(&self.yt[k], w1, n) * -t[1],
                Matrix::from_column_slice(m, n, w1) * -t[2],
                right(w2, m, xnt) * t[3],
                left(&self.yt[k], w2, n) * -t[4],
                Matrix::from_column_slice(m, n, w2) * -t[5],
            ];
            for (b, part) in parts.iter().enumerate() {
                out.rows_mut(self.block_columns(k, b).start, part.len())
                    .copy_from_slice(part.as_slice());
            }
        }
        out
    }
}

/// `Ĥ`, `H₁` or `H₂` in either representation.
#[derive(Debug, Clone)]
pub enum ScaledOperator {
    Explicit(Matrix),
    Implicit(ScaledDataOperator),
}

impl ScaledOperator {
    pub fn dense(&self) -> Option<&Matrix> {
        match self {
            ScaledOperator::Explicit(m) => Some(m),
            ScaledOperator::Implicit(_) => None,
        }
    }
}

impl LinearOperator for ScaledOperator {
    fn nrows(&self) -> usize {
        match self {
            ScaledOperator::Explicit(m) => m.nrows(),
            ScaledOperator::Implicit(op) => op.nrows(),
        }
    }
    fn ncols(&self) -> usize {
        match self {
            ScaledOperator::Explicit(m) => m.ncols(),
            ScaledOperator::Implicit(op) => op.ncols(),
        }
    }
    fn apply(&self, x: &Vector) -> Vector {
        match self {
            ScaledOperator::Explicit(m) => m * x,
            ScaledOperator::Implicit(op) => op.apply(x),
        }
    }
    fn apply_transpose(&self, y: &Vector) -> Vector {
        match self {
            ScaledOperator::Explicit(m) => m.tr_mul(y),
            ScaledOperator::Implicit(op) => op.apply_transpose(y),
        }
    }
}

/// Implicit scaled data operator for `solution` (exact or candidate) and `tolerances`.
pub fn scaled_operator(
    problem: &PgcsProblem,
    solution: &PgcsSolution,
    tolerances: &ToleranceSet,
) -> Result<ScaledDataOperator> {
    solution.check_shape(problem, "scaled operator")?;
    tolerances.validate(problem.p)?;
    let tr = |v: &[Matrix]| v.iter().map(|x| x.transpose()).collect();
    Ok(ScaledDataOperator {
        p: problem.p,
        m: problem.m,
        n: problem.n,
        x: solution.x.clone(),
        y: solution.y.clone(),
        xt: tr(&solution.x),
        yt: tr(&solution.y),
        tol: (0..problem.p).map(|k| tolerances.family(k)).collect(),
    })
}

/// Builds `Ĥ` / `H₁` / `H₂` in the requested mode.
pub fn build_scaled_operator(
    problem: &PgcsProblem,
    solution: &PgcsSolution,
    tolerances: &ToleranceSet,
    mode: AssemblyMode,
) -> Result<ScaledOperator> {
    let op = scaled_operator(problem, solution, tolerances)?;
    match mode {
        AssemblyMode::Implicit => Ok(ScaledOperator::Implicit(op)),
        AssemblyMode::Explicit { cap } => Ok(ScaledOperator::Explicit(op.to_dense(cap)?)),
    }
}

/// `t = [vec(A_1); vec(B_1); vec(E_1); vec(C_1); vec(D_1); vec(F_1); ...; vec(F_p)]`.
pub fn pack_data_vector(problem: &PgcsProblem) -> Vector {
    crate::model::concat_vecs((0..problem.p).flat_map(|k| problem.blocks(k)))
}

/// The scaled perturbation vector `u`: each `vec(ΔX_k)` divided by its tolerance.
pub fn pack_perturbation_vector(delta: &PerturbationSet, tolerances: &ToleranceSet) -> Result<Vector> {
    let p = delta.period();
    tolerances.validate(p)?;
    let parts: Vec<Vector> = (0..p)
        .flat_map(|k| {
            let tol = tolerances.family(k);
            delta
                .blocks(k)
                .into_iter()
                .zip(tol)
                .map(|(blk, t)| vectorize(blk) / t)
                .collect::<Vec<_>>()
        })
        .collect();
    let len = parts.iter().map(|v| v.len()).sum();
    let mut u = Vector::zeros(len);
    let mut off = 0;
    for v in parts {
        u.rows_mut(off, v.len()).copy_from(&v);
        off += v.len();
    }
    Ok(u)
}

/// Inverse of [`pack_perturbation_vector`].
pub fn unpack_perturbation_vector(
    u: &Vector,
    tolerances: &ToleranceSet,
    p: usize,
    m: usize,
    n: usize,
) -> Result<PerturbationSet> {
    tolerances.validate(p)?;
    let q = p * data_len_per_period(m, n);
    if u.len() != q {
        return Err(PgcsError::dim("perturbation vector", q, u.len()));
    }
    let mut delta = PerturbationSet::zeros(p, m, n);
    for k in 0..p {
        let tol = tolerances.family(k);
        for (b, blk) in delta.blocks_mut(k).into_iter().enumerate() {
            let (r, c) = block_shape(b, m, n);
            let cols = block_columns(k, b, m, n);
            *blk = unvectorize_slice(&u.as_slice()[cols], r, c)? * tol[b];
        }
    }
    Ok(delta)
}
