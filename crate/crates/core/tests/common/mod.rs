//! Shared fixtures and independent dense oracles for the integration suites.
#![allow(dead_code)]

use nalgebra::DMatrix;
use pgcs_core::rng::SeededRng;
use pgcs_core::{Matrix, PerturbationSet, PgcsProblem, PgcsSolution, ToleranceSet, Vector};

pub fn random_problem(rng: &mut SeededRng, p: usize, m: usize, n: usize) -> PgcsProblem {
    let mut fam = |r: usize, c: usize| -> Vec<Matrix> { (0..p).map(|_| rng.normal_matrix(r, c)).collect() };
    let (a, b, c, d, e, f) = (fam(m, m), fam(n, n), fam(m, m), fam(n, n), fam(m, n), fam(m, n));
    PgcsProblem::new(a, b, c, d, e, f).unwrap()
}

/// `(p, m, n)` with `2mnp <= max_order`.
pub fn random_shape(rng: &mut SeededRng, max_order: usize) -> (usize, usize, usize) {
    loop {
        let pick = |rng: &mut SeededRng, hi: usize| 1 + (rng.uniform() * hi as f64) as usize;
        let (p, m, n) = (pick(rng, 4), pick(rng, 5), pick(rng, 5));
        if 2 * m * n * p <= max_order {
            return (p, m, n);
        }
    }
}

fn vec_of(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

fn place(target: &mut Matrix, row: usize, col: usize, block: &Matrix) {
    let mut v = target.view_mut((row, col), block.shape());
    v += block;
}

/// `W` from `vec(AXB) = (Bᵀ ⊗ A) vec(X)`, unknowns ordered `X_1, Y_1, ..., X_p, Y_p`.
pub fn oracle_w(a: &[Matrix], b: &[Matrix], c: &[Matrix], d: &[Matrix], m: usize, n: usize) -> Matrix {
    let p = a.len();
    let mn = m * n;
    let im = DMatrix::<f64>::identity(m, m);
    let inn = DMatrix::<f64>::identity(n, n);
    let mut w = Matrix::zeros(2 * mn * p, 2 * mn * p);
    for k in 0..p {
        let (x, y, xn) = (2 * k * mn, (2 * k + 1) * mn, 2 * ((k + 1) % p) * mn);
        place(&mut w, 2 * k * mn, x, &inn.kronecker(&a[k]));
        place(&mut w, 2 * k * mn, y, &-b[k].transpose().kronecker(&im));
        place(&mut w, (2 * k + 1) * mn, xn, &inn.kronecker(&c[k]));
        place(&mut w, (2 * k + 1) * mn, y, &-d[k].transpose().kronecker(&im));
    }
    w
}

pub fn oracle_w_problem(pr: &PgcsProblem) -> Matrix {
    oracle_w(&pr.a, &pr.b, &pr.c, &pr.d, pr.m, pr.n)
}

pub fn oracle_delta_w(d: &PerturbationSet, m: usize, n: usize) -> Matrix {
    oracle_w(&d.da, &d.db, &d.dc, &d.dd, m, n)
}

/// `H` with columns per period ordered `A, B, E, C, D, F`, each scaled by its tolerance.
pub fn oracle_h(pr: &PgcsProblem, sol: &PgcsSolution, tol: &ToleranceSet) -> Matrix {
    let (p, m, n) = (pr.p, pr.m, pr.n);
    let mn = m * n;
    let per = 2 * m * m + 2 * n * n + 2 * mn;
    let im = DMatrix::<f64>::identity(m, m);
    let inn = DMatrix::<f64>::identity(n, n);
    let imn = DMatrix::<f64>::identity(mn, mn);
    let mut h = Matrix::zeros(2 * mn * p, per * p);
    for k in 0..p {
        let t = tol.family(k);
        let (x, y, xn) = (&sol.x[k], &sol.y[k], &sol.x[(k + 1) % p]);
        let blocks = [
            x.transpose().kronecker(&im) * t[0],
            -inn.kronecker(y) * t[1],
            -&imn * t[2],
            xn.transpose().kronecker(&im) * t[3],
            -inn.kronecker(y) * t[4],
            -&imn * t[5],
        ];
        let mut col = k * per;
        for (i, blk) in blocks.iter().enumerate() {
            let row = (2 * k + i / 3) * mn;
            place(&mut h, row, col, blk);
            col += blk.ncols();
        }
    }
    h
}

/// Each block is `scale * tolerance` in Frobenius norm, so `ε = scale`.
pub fn scaled_perturbation(rng: &mut SeededRng, pr: &PgcsProblem, tol: &ToleranceSet, scale: f64) -> PerturbationSet {
    let mut d = PerturbationSet::zeros(pr.p, pr.m, pr.n);
    for k in 0..pr.p {
        let t = tol.family(k);
        for (blk, tk) in d.blocks_mut(k).into_iter().zip(t) {
            let g = rng.normal_matrix(blk.nrows(), blk.ncols());
            *blk = &g * (scale * tk / g.norm());
        }
    }
    d
}

/// Exact change of the solution `z` (taken as exact for `W z = Wẑ`) under `d`:
/// `(W + ΔW)⁻¹ (Δg − ΔW z)`, formed from the matrices without the base residual.
pub fn oracle_delta_z(pr: &PgcsProblem, sol: &PgcsSolution, d: &PerturbationSet) -> Vector {
    let perturbed = pgcs_core::model::apply_perturbation(pr, d).unwrap();
    let wt = oracle_w_problem(&perturbed);
    let mut rhs = Vec::new();
    for k in 0..pr.p {
        let (x, y, xn) = (&sol.x[k], &sol.y[k], &sol.x[(k + 1) % pr.p]);
        let r1 = &d.de[k] - (&d.da[k] * x - y * &d.db[k]);
        let r2 = &d.df[k] - (&d.dc[k] * xn - y * &d.dd[k]);
        rhs.extend_from_slice(vec_of(&r1).as_slice());
        rhs.extend_from_slice(vec_of(&r2).as_slice());
    }
    wt.lu().solve(&Vector::from_vec(rhs)).expect("perturbed system nonsingular")
}

pub fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
