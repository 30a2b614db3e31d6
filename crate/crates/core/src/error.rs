use thiserror::Error;

/// Errors raised by the numerical routines and the experiment driver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} lies outside {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("derivative order {0} is not supported (use 1 or 2)")]
    UnsupportedOrder(u32),

    #[error("{requested} offspring laws requested but only {available} available")]
    InsufficientLaws { requested: usize, available: usize },

    #[error("wrong regime: {0}")]
    Regime(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate fractional-linear form: {0}")]
    Degenerate(String),

    #[error("cross-check failed: {0}")]
    CrossCheck(String),

    #[error("invalid experiment spec: {0}")]
    Spec(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "[0, 1]",
        })
    }
}
