use thiserror::Error;

/// Errors raised by the numeric kernels, the design model and the calibration routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of a mathematical function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature did not reach the requested accuracy.
    #[error("quadrature failed to converge: estimated error {estimate:e} exceeds {tolerance:e}")]
    Accuracy { estimate: f64, tolerance: f64 },

    /// A design, layout, scenario or configuration violates its invariants.
    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },

    /// No threshold on the calibration grid keeps the FWER at or below alpha.
    #[error("no lambda on the {prec_digits}-digit grid controls the FWER at {alpha}: fwer at lambda = {lambda_max} is {fwer_at_max}")]
    Infeasible {
        alpha: f64,
        prec_digits: u32,
        lambda_max: f64,
        fwer_at_max: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(what: &'static str, reason: impl Into<String>) -> Result<T> {
    Err(Error::Validation {
        what,
        reason: reason.into(),
    })
}
