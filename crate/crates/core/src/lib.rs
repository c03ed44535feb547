//! Sums of powers of principal minors (SPPM) of square matrices: exact
//! enumeration, Hubbard-Stratonovich identities, a strong-weak duality
//! transform, and three mean-field approximation schemes, applied to two
//! fully checkable problems — spanning-forest thermodynamics of the chain
//! Laplacian and the Shannon-Renyi entropy of the transverse-field Ising
//! chain — plus a desk-scale Hubbard partition-function bridge.
//!
//! The central object is `M^(n)(A) = sum_I det(A_I)^n` over all `2^l`
//! principal submatrices `A_I` (rows and columns in `I`, kept in order,
//! with the empty minor counting 1). Everything is carried in log-domain
//! scalars because these sums overflow native floats around `l = 40`.

pub mod dual;
pub mod hubbard;
pub mod io;
pub mod ising;
pub mod laplacian;
pub mod logsigned;
pub mod matrix;
pub mod meanfield;
pub mod par;
pub mod quad;
pub mod sppm;

pub use logsigned::LogSigned;
pub use matrix::{IndexSubset, SquareMatrix};

use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum Error {
    /// Violated precondition on caller-supplied data.
    #[error("input error: {0}")]
    Input(String),

    /// Arithmetic breakdown (singular matrix, failed bracket, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Request beyond the enumeration ceilings.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Evaluation outside a function's domain; carries the threshold.
    #[error("domain error: mu = {mu} is at or below the threshold mu_th = {mu_th}")]
    Domain { mu: f64, mu_th: f64 },

    /// No solver run converged; carries per-start residuals.
    #[error("solver error: no converged solution ({0})")]
    Solver(String),

    /// A scan predicate never fired.
    #[error("scan error: {0}")]
    Scan(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI: 1 input, 2 numeric, 3 capacity.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) => 1,
            Error::Capacity(_) => 3,
            _ => 2,
        }
    }
}
