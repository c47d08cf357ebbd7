use std::f64::consts::PI;

use super::{Convention, CovarianceMatrix};
use crate::error::{Error, Result};

/// Wigner function of the zero-mean Gaussian state with covariance `cov`
/// (converted to the physical normalization), at phase-space point `(q, p)`.
pub fn wigner(cov: &CovarianceMatrix, q: f64, p: f64) -> Result<f64> {
    let cov = cov.to_convention(Convention::Moment);
    let det = cov.determinant();
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::numeric(format!("Wigner function of a singular covariance {cov:?}")));
    }
    let quad = (cov.s22 * q * q - 2.0 * cov.s12 * q * p + cov.s11 * p * p) / det;
    Ok((-0.5 * quad).exp() / (2.0 * PI * det.sqrt()))
}
