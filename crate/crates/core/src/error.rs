use thiserror::Error;

/// Errors raised by the library. Every numerical failure is reported; no
/// routine silently returns a fallback value.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state outside the admissible region: {0}")]
    Domain(String),

    #[error("hyperbolicity failure: {0}")]
    HyperbolicityFailure(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("CFL condition violated: {0}")]
    Cfl(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Short machine-readable tag used in JSON error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownModel(_) => "unknown-model",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Domain(_) => "domain",
            Error::HyperbolicityFailure(_) => "hyperbolicity-failure",
            Error::SolverFailure(_) => "solver-failure",
            Error::Cfl(_) => "cfl",
            Error::Config(_) => "config",
        }
    }

    /// True for errors caused by user input rather than by a computation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::UnknownModel(_) | Error::InvalidParameter(_) | Error::Config(_) | Error::Cfl(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
