use serde::{Deserialize, Serialize};

use super::{Convention, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::linalg::Mat2;

/// Tolerances of the pure-state branch: `|det - 1|` and `|P'|`.
const PURE_DET_TOLERANCE: f64 = 1e-9;
const PURE_DPURITY_TOLERANCE: f64 = 1e-9;
/// Negative QFI values smaller than this (relative) are rounding.
const NEGATIVE_TOLERANCE: f64 = 1e-10;

/// Parameter derivative of a covariance, in the normalization of the
/// covariance it accompanies.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CovarianceDerivative {
    pub d11: f64,
    pub d12: f64,
    pub d22: f64,
}

impl CovarianceDerivative {
    fn matrix(&self) -> Mat2 {
        Mat2::new(self.d11, self.d12, self.d12, self.d22)
    }
}

/// Quantum Fisher information of a single-mode Gaussian family at one point:
///
/// `Tr[(S^-1 S')^2] / (2 (1 + P^2)) + 2 P'^2 / (1 - P^4) + X'^T S^-1 X'`
///
/// evaluated in the QFI normalization, with `P = det(S)^-1/2` and
/// `P' = -P Tr(S^-1 S') / 2`. `dcov` and `mean_deriv` are given in the
/// normalization of `cov` and converted with it.
pub fn qfi_single_mode(
    cov: &CovarianceMatrix,
    dcov: &CovarianceDerivative,
    mean_deriv: [f64; 2],
) -> Result<f64> {
    let scale = match cov.convention {
        Convention::Moment => 2.0,
        Convention::Qfi => 1.0,
    };
    let sigma = cov.to_convention(Convention::Qfi);
    let inv = sigma.inverse()?;
    let a = inv * (dcov.matrix() * scale);
    let trace_sq = (a * a).trace();
    let det = sigma.determinant();
    let p = det.sqrt().recip();
    let dp = -0.5 * p * a.trace();

    let mixedness = 1.0 - p.powi(4);
    let purity_term = if (det - 1.0).abs() <= PURE_DET_TOLERANCE {
        if dp.abs() > PURE_DPURITY_TOLERANCE {
            return Err(Error::PureStateLimit { det, dpurity: dp });
        }
        0.0
    } else {
        2.0 * dp * dp / mixedness
    };

    let x = nalgebra::Vector2::new(mean_deriv[0], mean_deriv[1]) * scale.sqrt();
    let displacement = (x.transpose() * inv * x)[(0, 0)];

    let f = trace_sq / (2.0 * (1.0 + p * p)) + purity_term + displacement;
    if !f.is_finite() {
        return Err(Error::numeric(format!("non-finite QFI for {cov:?}, {dcov:?}")));
    }
    let magnitude = trace_sq.abs() + purity_term.abs() + displacement.abs();
    if f < -NEGATIVE_TOLERANCE * magnitude.max(f64::MIN_POSITIVE) {
        return Err(Error::Consistency(format!("negative QFI {f:.6e}")));
    }
    Ok(f.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::super::{moments_to_covariance, thermal_moments, GaussianSnapshot};
    use super::super::fidelity::{bures_step_for, qfi_bures_central, qfi_bures_fd, BuresOptions};
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn static_family_has_zero_qfi() {
        let cov = moments_to_covariance(thermal_moments(10.0).unwrap(), Convention::Qfi);
        assert_eq!(qfi_single_mode(&cov, &CovarianceDerivative::default(), [0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn displacement_of_vacuum() {
        let vac = CovarianceMatrix::vacuum(Convention::Qfi);
        let f = qfi_single_mode(&vac, &CovarianceDerivative::default(), [1.0, 0.0]).unwrap();
        assert_relative_eq!(f, 1.0, max_relative = 1e-15);
        // the same family in physical units: 4 Var(p) = 2
        let vac = CovarianceMatrix::vacuum(Convention::Moment);
        let f = qfi_single_mode(&vac, &CovarianceDerivative::default(), [1.0, 0.0]).unwrap();
        assert_relative_eq!(f, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn thermal_family_closed_form_and_oracle() {
        // Sigma = (2n + 1) I in the QFI normalization, Sigma' = 2 n' I
        let (n, dn) = (100.0, 0.7);
        let cov = moments_to_covariance(thermal_moments(n).unwrap(), Convention::Qfi);
        let dcov = CovarianceDerivative { d11: 2.0 * dn, d12: 0.0, d22: 2.0 * dn };
        let f = qfi_single_mode(&cov, &dcov, [0.0, 0.0]).unwrap();
        assert_relative_eq!(f, dn * dn / (n * (n + 1.0)), max_relative = 1e-12);

        let family = |phi: f64| {
            Ok(GaussianSnapshot::centered(moments_to_covariance(
                thermal_moments(n + dn * phi)?,
                Convention::Qfi,
            )))
        };
        let h = bures_step_for(family, 0.0, 1e-2, 1e-5).unwrap();
        let oracle = qfi_bures_fd(family, 0.0, h, BuresOptions::default()).unwrap();
        assert_relative_eq!(oracle.value, f, max_relative = 1e-4);
    }

    #[test]
    fn central_bures_estimate_on_a_squeezed_family() {
        // strongly squeezed thermal family rotating with phi: F has no purity
        // term and equals the closed form
        let (n, r): (f64, f64) = (50.0, 3.0);
        let family = |phi: f64| {
            let (a, b) = ((2.0 * n + 1.0) * (-2.0 * r).exp(), (2.0 * n + 1.0) * (2.0 * r).exp());
            let (c, s) = (phi.cos(), phi.sin());
            let cov = CovarianceMatrix::new(a * c * c + b * s * s, (b - a) * c * s, a * s * s + b * c * c, Convention::Qfi)?;
            Ok(GaussianSnapshot::centered(cov))
        };
        let phi0: f64 = 0.4;
        let (c, s) = (phi0.cos(), phi0.sin());
        let (a, b) = ((2.0 * n + 1.0) * (-2.0 * r).exp(), (2.0 * n + 1.0) * (2.0 * r).exp());
        let cov = family(phi0).unwrap().cov;
        let dcov = CovarianceDerivative {
            d11: 2.0 * (b - a) * c * s,
            d12: (b - a) * (c * c - s * s),
            d22: -2.0 * (b - a) * c * s,
        };
        let f = qfi_single_mode(&cov, &dcov, [0.0, 0.0]).unwrap();
        let h = bures_step_for(family, phi0, 1e-6, 3e-4).unwrap();
        let central = qfi_bures_central(family, phi0, h, BuresOptions::default()).unwrap();
        assert_relative_eq!(central.value, f, max_relative = 1e-6);
    }

    #[test]
    fn pure_squeezing_family() {
        // squeezed vacuum with r(phi) = phi: Sigma = diag(e^{-2r}, e^{2r}), F = 2 r'^2
        let r: f64 = 0.3;
        let cov = CovarianceMatrix::new((-2.0 * r).exp(), 0.0, (2.0 * r).exp(), Convention::Qfi).unwrap();
        let dcov = CovarianceDerivative { d11: -2.0 * (-2.0 * r).exp(), d12: 0.0, d22: 2.0 * (2.0 * r).exp() };
        let f = qfi_single_mode(&cov, &dcov, [0.0, 0.0]).unwrap();
        assert_relative_eq!(f, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn pure_state_with_moving_purity_is_flagged() {
        let vac = CovarianceMatrix::vacuum(Convention::Qfi);
        let dcov = CovarianceDerivative { d11: 1.0, d12: 0.0, d22: 1.0 };
        assert!(matches!(
            qfi_single_mode(&vac, &dcov, [0.0, 0.0]),
            Err(Error::PureStateLimit { .. })
        ));
    }
}
