//! Column-stacking vectorization and Kronecker-structured products.
//!
//! Storage is column-major, so `vec(M)` and its inverse are copies of the
//! backing slice. Products with `C^T ⊗ A` are applied through the identity
//! `vec(A X C) = (C^T ⊗ A) vec(X)` and never materialize the Kronecker factor.

use nalgebra::DMatrixView;

use crate::{Matrix, PgcsError, Result, Vector};

/// Stacks the columns of `m` one underneath the other.
pub fn vectorize(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &Vector, rows: usize, cols: usize) -> Result<Matrix> {
    unvectorize_slice(v.as_slice(), rows, cols)
}

pub(crate) fn unvectorize_slice(v: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(PgcsError::dim(
            "unvectorize",
            format!("{rows}x{cols} = {}", rows * cols),
            v.len(),
        ));
    }
    Ok(Matrix::from_column_slice(rows, cols, v))
}

/// Kronecker product `A ⊗ B`: block `(i, j)` is `A(i, j) * B`.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    let (p, q) = a.shape();
    let (r, s) = b.shape();
    let mut out = Matrix::zeros(p * r, q * s);
    for j in 0..q {
        for i in 0..p {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            let mut block = out.view_mut((i * r, j * s), (r, s));
            block.zip_apply(b, |o, bv| *o = aij * bv);
        }
    }
    out
}

/// Computes `(C^T ⊗ A) x = vec(A · unvec(x) · C)`.
pub fn apply_sandwich(a: &Matrix, c: &Matrix, x: &Vector) -> Result<Vector> {
    let rows = a.ncols();
    let cols = c.nrows();
    if x.len() != rows * cols {
        return Err(PgcsError::dim(
            "apply_sandwich",
            format!("{} (A.cols {} x C.rows {})", rows * cols, rows, cols),
            x.len(),
        ));
    }
    let xm = DMatrixView::from_slice(x.as_slice(), rows, cols);
    Ok(vectorize(&(a * xm * c)))
}

/// `vec(A X)` for `x = vec(X)` with `X` having `cols` columns, i.e. `(I ⊗ A) x`.
pub(crate) fn left(a: &Matrix, x: &[f64], cols: usize) -> Matrix {
    a * DMatrixView::from_slice(x, a.ncols(), cols)
}

/// `vec(X C)` for `x = vec(X)` with `X` having `rows` rows, i.e. `(C^T ⊗ I) x`.
pub(crate) fn right(x: &[f64], rows: usize, c: &Matrix) -> Matrix {
    DMatrixView::from_slice(x, rows, c.nrows()) * c
}
