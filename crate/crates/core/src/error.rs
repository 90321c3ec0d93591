use thiserror::Error;

/// Errors produced by the rate, scenario and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QkdError {
    /// A scalar argument fell outside its mathematical domain.
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    /// The inputs admit no physical solution.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// A structured input (scenario, range, protocol name) is invalid.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = QkdError> = std::result::Result<T, E>;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(QkdError::Domain {
            name,
            value,
            domain: "[0, 1]",
        })
    }
}
