use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input outside the domain of the operation (negative occupation,
    /// non-positive temperature, an unphysical covariance, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Singular matrices, overflow and similar floating-point failures.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Two routes that must agree did not.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    /// A step-halving pair of finite-difference estimates did not converge.
    #[error(
        "{what} unreliable: coarse {coarse:.6e}, fine {fine:.6e}, relative discrepancy {discrepancy:.3e}"
    )]
    Unreliable {
        what: &'static str,
        coarse: f64,
        fine: f64,
        discrepancy: f64,
    },

    /// The family stays (numerically) pure but its purity still moves, so
    /// the purity term of the Gaussian QFI has no finite limit.
    #[error("pure-state limit: det = {det:.3e}, purity derivative = {dpurity:.3e}")]
    PureStateLimit { det: f64, dpurity: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("integrator error: {0}")]
    Integrator(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
