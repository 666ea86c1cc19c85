use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("effective channel H R_o H^H is zero; no communication is possible")]
    ZeroChannel,
    #[error("infeasible effective precoder: {0}")]
    Infeasible(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("degenerate solution: {0}")]
    Degenerate(String),
    #[error("KKT verification failed: {0}")]
    Verification(String),
    #[error("target unreachable: {0}")]
    Unreachable(String),
}
