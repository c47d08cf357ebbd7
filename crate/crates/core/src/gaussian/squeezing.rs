use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::{purity, CovarianceMatrix};
use crate::error::{Error, Result};

/// Below this `r` the ellipse is a circle to working precision and the angle
/// carries no information.
const ANGLE_RESOLUTION: f64 = 1e-12;
const TIE_TOLERANCE: f64 = 1e-12;
const ARCSIN_SLACK: f64 = 1e-10;

/// Squeezed-thermal parameters of a zero-mean Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingDecomposition {
    pub r: f64,
    /// Orientation of the squeezed quadrature relative to the q axis, in
    /// `(-pi/2, pi/2]`; `None` when the state is isotropic.
    pub phi: Option<f64>,
    pub purity: f64,
}

fn wrap_half_turn(angle: f64) -> f64 {
    let mut a = angle % PI;
    if a <= -FRAC_PI_2 {
        a += PI;
    } else if a > FRAC_PI_2 {
        a -= PI;
    }
    a
}

/// Squeezing strength `r = asinh(sqrt(gamma / det) / 2) / 2` with
/// `gamma = (s22 - s11)^2 + (2 s12)^2`, and the squeezing angle from the
/// two-branch arcsine rule. Both are ratios, so either normalization works.
pub fn squeezing_decomposition(cov: &CovarianceMatrix) -> Result<SqueezingDecomposition> {
    let det = cov.determinant();
    if cov.s11 <= 0.0 || cov.s22 <= 0.0 || !(det > 0.0) {
        return Err(Error::domain(format!("squeezing of a non-positive-definite covariance {cov:?}")));
    }
    let diff = cov.s22 - cov.s11;
    let cross = 2.0 * cov.s12;
    let root_gamma = diff.hypot(cross);
    let r = 0.5 * (0.5 * root_gamma / det.sqrt()).asinh();

    let phi = if r < ANGLE_RESOLUTION {
        None
    } else if diff.abs() < TIE_TOLERANCE * cov.s11.max(cov.s22) {
        // s11 == s22: both branches meet at 2 phi = -sign(s12) pi/2
        Some(wrap_half_turn(-cov.s12.signum() * FRAC_PI_2 / 2.0))
    } else {
        let mut ratio = cross / root_gamma;
        if ratio.abs() > 1.0 {
            if ratio.abs() - 1.0 > ARCSIN_SLACK {
                return Err(Error::Consistency(format!("arcsin argument {ratio} out of range")));
            }
            ratio = ratio.clamp(-1.0, 1.0);
        }
        let two_phi = if cov.s11 < cov.s22 { -ratio.asin() } else { PI + ratio.asin() };
        Some(wrap_half_turn(two_phi / 2.0))
    };

    Ok(SqueezingDecomposition { r, phi, purity: purity(cov)? })
}
