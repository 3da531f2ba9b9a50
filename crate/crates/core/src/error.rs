use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("argument outside the function domain: {0}")]
    Domain(String),

    #[error("covert bounds invariant violated: {0}")]
    CovertInvariant(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("conic solution unusable (status {0:?})")]
    BadStatus(crate::conic::SolveStatus),

    #[error("anchor point outside the feasible set: {0}")]
    InfeasibleAnchor(String),

    #[error("operation not defined for the proposed scheme")]
    ProposedScheme,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
