use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("determinant {0:e} is not positive")]
    NonPositiveDeterminant(f64),

    #[error("tensor is singular")]
    SingularTensor,

    #[error("tensor is not positive definite")]
    NotPositiveDefinite,

    #[error("activation argument {0:e} exceeds the hard limit")]
    ActivationOverflow(f64),

    #[error("return mapping did not converge: {0}")]
    NewtonDivergence(String),

    #[error("plastic flow direction vanishes at a yielding state")]
    DegenerateFlow,

    #[error("invalid load path: {0}")]
    InvalidPath(String),

    #[error("yield surface is unbounded along direction {0:?}")]
    UnboundedSurface([f64; 3]),

    #[error("parse error at line {line}, column `{column}`: {message}")]
    Parse {
        line: usize,
        column: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid weights: {0}")]
    Weights(String),

    #[error("non-finite gradient component for `{0}`")]
    NonFiniteGradient(String),

    #[error("simulation of dataset {dataset} failed: {source}")]
    Simulation {
        dataset: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for failures of the numerical pipeline (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveDeterminant(_)
                | Error::SingularTensor
                | Error::NotPositiveDefinite
                | Error::ActivationOverflow(_)
                | Error::NewtonDivergence(_)
                | Error::DegenerateFlow
                | Error::UnboundedSurface(_)
                | Error::NonFiniteGradient(_)
                | Error::Simulation { .. }
        )
    }
}
