use thiserror::Error;

/// Errors raised by the key-rate pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid variance {0}: modulation variance must be >= 1")]
    InvalidVariance(f64),

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("singular channel: transmittance {0} makes the channel noise diverge")]
    SingularChannel(f64),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("infeasible security budget: {0}")]
    InfeasibleBudget(String),

    #[error("bin width {0} outside the validity window (0, 0.5] of the small-width c(delta) approximation")]
    OutOfValidity(f64),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("inconsistent common cloner variance: W1 = {w1}, W2 = {w2}")]
    InconsistentCommonVariance { w1: f64, w2: f64 },

    #[error("unbounded: {0}")]
    Unbounded(String),

    #[error("non-physical covariance matrix (min eigenvalue of gamma + i*Omega = {0:e})")]
    NonPhysical(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    range: &'static str,
    ok: bool,
) -> Result<()> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value, range })
    }
}
