use thiserror::Error;

/// Errors produced by the analysis and simulation routines.
///
/// Numeric payloads are carried as `f64` regardless of the scalar type used
/// for the computation so that the error type stays non-generic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}` = {value}: {reason}")]
    Parameter {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("gain solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("no nonnegative gain set satisfies the criterion at f_n = {natural_frequency_hz} Hz")]
    InfeasibleFrequency { natural_frequency_hz: f64 },
    #[error("no unity-gain crossover in [{f_lo}, {f_hi}] Hz")]
    NoCrossover { f_lo: f64, f_hi: f64 },
    #[error("evaluation failed at {omega} rad/s: {reason}")]
    Evaluation { omega: f64, reason: &'static str },
    #[error("invalid simulation configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn positive<T: crate::Scalar>(field: &'static str, value: T) -> Result<()> {
    if value > T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter {
            field,
            value: value.to_f64().unwrap_or(f64::NAN),
            reason: "must be strictly positive and finite",
        })
    }
}

pub(crate) fn nonnegative<T: crate::Scalar>(field: &'static str, value: T) -> Result<()> {
    if value >= T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter {
            field,
            value: value.to_f64().unwrap_or(f64::NAN),
            reason: "must be nonnegative and finite",
        })
    }
}
