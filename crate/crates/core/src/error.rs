use thiserror::Error;

/// Errors produced by the test model, the simulators, and the table readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("noise density vanishes at {at}; the log-likelihood ratio is undefined")]
    ZeroDensity { at: f64 },
    #[error("noise model rejected: {0}")]
    InvalidNoise(String),
    #[error("every trajectory was censored at the horizon of {horizon} steps")]
    AllCensored { horizon: usize },
    #[error("trace retention needs {required} bytes, over the budget of {budget}")]
    MemoryBudget { required: u128, budget: u128 },
    #[error("the density oracle needs a closed-form increment kernel; `{0}` noise is not supported")]
    UnsupportedNoise(String),
    #[error("mass conservation residual {residual:e} exceeds tolerance {tolerance:e}")]
    MassResidual { residual: f64, tolerance: f64 },
    #[error("P(U_{k} = {state}) is zero; information density undefined")]
    UndefinedCell { k: usize, state: &'static str },
    #[error("step {k} is beyond the table horizon {horizon}")]
    OutOfRange { k: usize, horizon: usize },
    #[error("table schema mismatch: {0}")]
    Schema(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
