use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants map onto the CLI exit codes: input problems exit with 2,
/// numeric failures (solver did not converge, normalizer missing, ...) with 1.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("all weights are zero")]
    AllZero,

    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown label `{label}` at observation {position}")]
    UnknownLabel { label: String, position: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid alpha {0}: must be finite and > 0")]
    InvalidAlpha(f64),

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("parameter outside the family domain; bracket <= 0 at symbols {symbols:?}")]
    DomainViolation { symbols: Vec<usize> },

    #[error("normalizer not found (searched Z in [{lo}, {hi}])")]
    NormalizerNotFound { lo: f64, hi: f64 },

    #[error("linear family is infeasible")]
    Infeasible,

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64, best_theta: Vec<f64> },

    #[error("grid has no feasible point")]
    EmptyFeasibleGrid,

    #[error("no admissible parameter on the grid")]
    NoAdmissibleTheta,

    #[error("input error: {0}")]
    Input(String),
}

impl Error {
    /// True for failures caused by bad input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::AllZero
                | Error::NegativeWeight { .. }
                | Error::NotNormalized { .. }
                | Error::UnknownLabel { .. }
                | Error::EmptySample
                | Error::Dimension(_)
                | Error::InvalidAlpha(_)
                | Error::InvalidFamily(_)
                | Error::Input(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
