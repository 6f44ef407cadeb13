use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("incompatible reference measures: {0}")]
    IncompatibleReference(String),
    #[error("not a probability measure: {0}")]
    NotProbability(String),
    #[error("signed measure where a nonnegative one is required: {0}")]
    SignedMeasure(String),
    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("score construction failed for pair ({i}, {j}): {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    /// True for failures of numerical origin (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonConvergence(_) => true,
            Error::Pair { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
