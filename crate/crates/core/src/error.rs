use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A secret-key component lies outside its admissible domain.
    #[error("key domain error: {0}")]
    KeyDomain(String),

    /// Image, block or matrix shapes do not line up.
    #[error("layout error: {0}")]
    Layout(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Two phase-space points that must be separated coincide.
    #[error("degenerate distance: {0}")]
    DegenerateDistance(String),

    /// No neighbor candidate satisfies the angle constraint.
    #[error("replacement failure: {0}")]
    ReplacementFailure(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
