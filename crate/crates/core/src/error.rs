use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside the domain [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("modulus is not Dini summable: {0}")]
    NotDini(String),

    #[error("series diverges: {0}")]
    Divergent(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("subspace is not transverse to the reference stable factor")]
    NotTransverse,

    #[error("singular linear map")]
    Singular,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("estimate below resolution: {0}")]
    BelowResolution(String),

    #[error("coding mismatch: {0}")]
    CodingMismatch(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by the caller's input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::InvalidInput(_)
                | Error::NotDini(_)
                | Error::NotTransverse
                | Error::Precondition(_)
                | Error::CodingMismatch(_)
                | Error::UnknownExperiment(_)
                | Error::Config(_)
                | Error::Json(_)
        )
    }

    /// Process exit code used by the CLI: 2 for validation errors, 3 for
    /// numeric non-convergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotConverged { .. } | Error::Divergent(_) | Error::BelowResolution(_) => 3,
            e if e.is_validation() => 2,
            _ => 1,
        }
    }
}
