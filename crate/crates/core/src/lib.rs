//! Solver and perturbation analysis for the periodic generalized coupled
//! Sylvester (PGCS) equation
//!
//! ```text
//! A_k X_k     - Y_k B_k = E_k
//! C_k X_{k+1} - Y_k D_k = F_k,     k = 1..p,  X_{p+1} = X_1
//! ```
//!
//! The crate covers the dense direct solve of the Kronecker form `W z = g`,
//! normwise backward error bounds, rigorous and first-order perturbation
//! bounds, exact condition numbers (normwise, effective, mixed and
//! componentwise) and two randomized estimators: a Lanczos-based
//! probabilistic spectral-norm bracket (PCE) and small-sample statistical
//! condition estimation (SCE).
//!
//! All matrices are column-major [`nalgebra::DMatrix`] values, so `vec(M)`
//! is a relabeling of the storage.

pub mod assembly;
pub mod backward_error;
pub mod conditioning;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod kron;
pub mod model;
pub mod perturbation;
pub mod rng;
pub mod solver;

pub use error::{PgcsError, Result};
pub use model::{PerturbationSet, PgcsProblem, PgcsSolution, ResidualSet, ToleranceSet};

/// Dense real matrix, column-major.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense real vector.
pub type Vector = nalgebra::DVector<f64>;

/// Default cap on the order of explicitly materialized system matrices.
pub const DEFAULT_DENSE_CAP: usize = 4000;

/// Environment variable overriding [`DEFAULT_DENSE_CAP`].
pub const DENSE_CAP_ENV: &str = "PGCS_DENSE_CAP";

/// Reads the dense size cap from `PGCS_DENSE_CAP`, falling back to the default.
pub fn dense_cap_from_env() -> usize {
    std::env::var(DENSE_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_DENSE_CAP)
}
