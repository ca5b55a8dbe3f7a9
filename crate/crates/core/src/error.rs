use thiserror::Error;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the physical domain (e.g. `x <= 0`).
    #[error("domain error: {what} must satisfy {requirement}, got {value}")]
    Domain {
        what: &'static str,
        requirement: &'static str,
        value: f64,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The requested computation needs a different dynamical regime.
    #[error("regime error: {0}")]
    Regime(String),

    #[error("x = {x} is not an equilibrium: |m(x) + a| = {residual:e}")]
    NotARoot { x: f64, residual: f64 },

    #[error("inconsistent degeneracy at x = {x}: m'(x) = {m_prime:e} vanishes but no degenerate rule applies")]
    InconsistentDegeneracy { x: f64, m_prime: f64 },

    #[error("no sign change bracketed on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("trajectory approached the singularity x1 = 0 (x1 = {x1:e} at t = {t})")]
    Singularity { t: f64, x1: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("energy drift {drift:e} exceeds {limit:e}")]
    EnergyDrift { drift: f64, limit: f64 },

    #[error("tail bound {bound:e} exceeds {limit:e}")]
    TailTooLarge { bound: f64, limit: f64 },

    #[error("quadrature routes disagree: {first} vs {second} (relative {rel:e})")]
    RouteMismatch { first: f64, second: f64, rel: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("manifold leaf did not reach the section within t = {limit}")]
    SectionNotReached { limit: f64 },
}

impl Error {
    /// True for failures caused by the parameter set rather than by numerics.
    pub fn is_parameter_error(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. } | Error::InvalidParams(_) | Error::Regime(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            requirement: "0 < value < inf",
            value,
        })
    }
}
