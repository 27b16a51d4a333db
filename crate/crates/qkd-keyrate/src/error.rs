use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("operator is not Hermitian (max asymmetry {max_dev:.3e}, tol {tol:.3e})")]
    NotHermitian { max_dev: f64, tol: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("trace is {trace:.12} but must be 1 within {tol:.1e}")]
    BadTrace { trace: f64, tol: f64 },

    #[error("numerical conditioning: {0}")]
    Conditioning(String),

    #[error("constraint set is infeasible{0}")]
    Infeasible(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("nonconvergence: {0}")]
    NonConvergence(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
