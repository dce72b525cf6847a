use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("transition matrix is not stochastic: row {row} {reason}")]
    NotStochastic { row: usize, reason: &'static str },

    #[error("stationary distribution is not unique (eigenvalue 1 has multiplicity {multiplicity})")]
    NonUniqueStationary { multiplicity: usize },

    #[error("chain is not reversible (detailed balance violated by {violation:e})")]
    NotReversible { violation: f64 },

    #[error("stationary mass of state {state} is zero")]
    ZeroMass { state: usize },

    #[error("start state {state} out of range for {n_states} states")]
    InvalidStart { state: usize, n_states: usize },

    #[error("linear system is numerically singular after jitter")]
    SingularSystem,

    #[error("Half-Quadratic solver needs a Gaussian or correntropy phi, got {kind}")]
    NonGaussianPhi { kind: &'static str },

    #[error("line search failed after {halvings} backtracking halvings")]
    LineSearchFailed { halvings: usize },

    #[error("noise density is not twice continuously differentiable ({reason})")]
    NonSmoothNoise { reason: &'static str },

    #[error("noise density fails the mode-at-zero check (grid argmax at {argmax})")]
    ModeNotAtZero { argmax: f64 },

    #[error("noise density integrates to {integral}, not 1")]
    NotNormalized { integral: f64 },
}

impl Error {
    /// Numeric failures, as opposed to invalid input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonUniqueStationary { .. }
                | Error::SingularSystem
                | Error::LineSearchFailed { .. }
        )
    }
}
