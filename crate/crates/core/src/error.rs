use crate::simplex::GridVertex;

/// Errors raised by the engine and the domain solvers built on it.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The oracle returned a label set that breaks the covering condition at a grid vertex.
    #[error("admissibility violation: cover {cover} returned {returned:?} at vertex {vertex}")]
    AdmissibilityViolation {
        cover: usize,
        vertex: GridVertex,
        returned: Vec<usize>,
    },

    #[error("no certified outcome up to resolution {max_resolution}: {diagnostics}")]
    ResolutionExceeded {
        max_resolution: u32,
        diagnostics: String,
    },

    #[error("unknown query id {0}")]
    UnknownQueryId(u64),

    #[error("invalid answer: {0}")]
    AnswerShapeInvalid(String),

    /// A previously answered query received a different answer.
    #[error("query {0} was already answered differently")]
    AnswerConflict(u64),

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("normalization error: {0}")]
    NormalizationError(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed document: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Format(err.to_string())
    }
}
