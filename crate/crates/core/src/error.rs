use alloc::string::String;
use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("duplicate study label `{0}`")]
    DuplicateLabel(String),

    #[error("study `{label}`: {arm} arm has no participants")]
    EmptyArm { label: String, arm: &'static str },

    #[error("study `{0}` has a zero cell and the continuity correction is disabled")]
    ZeroCell(String),

    #[error("minimum study count not met: need at least {needed}, got {got}")]
    TooFewStudies { needed: usize, got: usize },

    #[error("degenerate data: all studies report identical outcomes")]
    DegenerateData,

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("REML optimisation did not converge after {restarts} restarts")]
    NonConvergence { restarts: usize },

    #[error("fit has not converged")]
    NotConverged,

    #[error("SROC undefined: zero heterogeneity axis")]
    ZeroHeterogeneity,

    #[error("false positive rate {0} outside the open interval (0, 1)")]
    FprOutOfRange(f64),

    #[error("invalid integration range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("quadrature resolution {0} is below the minimum of 8")]
    ResolutionTooSmall(usize),

    #[error("confidence level {0} must lie strictly between 0 and 1")]
    InvalidLevel(f64),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bootstrap failure budget exceeded: {failures} failed refits, {allowed} allowed")]
    BudgetExceeded { failures: usize, allowed: usize },

    #[error("simulation aborted: {failed} of {attempted} replications failed")]
    SimulationFailures { failed: usize, attempted: usize },
}

impl Error {
    /// True for errors raised by the optimiser or by numerically unusable fits.
    pub fn is_convergence(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::NotConverged
                | Error::Singular(_)
                | Error::NonFinite(_)
                | Error::DegenerateData
                | Error::ZeroHeterogeneity
        )
    }
}
