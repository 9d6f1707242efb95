use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at cell {cell} of `{label}`")]
    NonFinite { cell: usize, label: String },

    #[error("weight `{label}` is not strictly positive and finite at cell {cell}")]
    NonPositiveWeight { cell: usize, label: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("cube family is empty")]
    EmptyFamily,

    #[error("cell {cell} is not covered by any cube of the family")]
    Uncovered { cell: usize },

    #[error("probe set is empty")]
    EmptyProbes,

    #[error("truncation parameter {eta} is below two grid spacings ({spacing})")]
    Unresolvable { eta: f64, spacing: f64 },

    #[error("no regularity certification available for {0}")]
    MissingCertification(String),

    #[error("inconsistent estimate: {0}")]
    Inconsistent(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
