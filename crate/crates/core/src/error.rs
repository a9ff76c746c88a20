use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the object is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two objects that must share a lattice do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A field violates a pointwise constraint (e.g. a density leaving [0,1]).
    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("kernel is not integrable: {0}")]
    NotIntegrable(String),

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error (line {line}): {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: msg.into(),
        }
    }
}
