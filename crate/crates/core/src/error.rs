use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The DC bias alone already reaches the threshold carrier density,
    /// so the device is not operating in the gain-switched regime.
    #[error("DC bias is above threshold: n_dc = {n_dc:e} m^-3 >= n_th = {n_th:e} m^-3")]
    AboveThresholdBias { n_dc: f64, n_th: f64 },

    #[error("no below-threshold photon steady state at n = {n:e} m^-3 (n_th = {n_th:e} m^-3)")]
    NoSteadyState { n: f64, n_th: f64 },

    #[error("integration diverged at t = {time:e} s")]
    Divergence { time: f64 },

    /// A negative density larger than rounding noise was produced by a step.
    #[error(
        "{quantity} went negative by {relative:e} (relative) at t = {time:e} s; step too large"
    )]
    ClampViolation {
        quantity: &'static str,
        time: f64,
        relative: f64,
    },

    #[error("carrier density never reaches n_th in cycle {cycle}")]
    BelowThresholdPulse { cycle: usize },

    #[error("trajectory does not cover cycle {cycle}")]
    CycleOutOfRange { cycle: usize },

    #[error("repetition rate undefined: carriers did not recover within the cycle")]
    UndefinedRate,

    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    #[error("no feasible attack distance in [{l_min} km, {l_max} km]")]
    NoCrossing { l_min: f64, l_max: f64 },

    #[error("Poisson truncation at n = {n_max} leaves tail bound {bound:e}")]
    Truncation { n_max: usize, bound: f64 },

    /// Configuration errors carry the 1-based source line when known.
    #[error("{}", match .line { Some(l) => format!("line {l}: {message}"), None => message.clone() })]
    Config {
        line: Option<usize>,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be finite, got {value}"
        )))
    }
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be finite and > 0, got {value}"
        )))
    }
}
