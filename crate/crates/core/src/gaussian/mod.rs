//! Single-mode Gaussian states with zero or explicit first moments.
//!
//! Two covariance normalizations are in play. The moment dynamics work with
//! the physical quadratures, where the vacuum has `<q^2> = <p^2> = 1/2`
//! ([`Convention::Moment`]). The closed-form fidelity and QFI expressions are
//! written for quadratures scaled by `sqrt(2)`, where the vacuum covariance is
//! the identity ([`Convention::Qfi`]). Every covariance carries its tag and
//! formulas convert on entry.

mod fidelity;
mod qfi;
mod squeezing;
mod wigner;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{det2, Mat2, Vec3};

pub use fidelity::{bures_distance, bures_step_for, fidelity, qfi_bures_central, qfi_bures_fd, BuresEstimate, BuresOptions};
pub use qfi::{qfi_single_mode, CovarianceDerivative};
pub use squeezing::{squeezing_decomposition, SqueezingDecomposition};
pub use wigner::wigner;

/// Reduced Planck constant, J s (exact SI value of h over 2 pi).
pub const HBAR: f64 = 6.626_070_15e-34 / (2.0 * std::f64::consts::PI);
/// Boltzmann constant, J/K (exact SI value).
pub const K_B: f64 = 1.380_649e-23;

/// Relative slack allowed on the uncertainty bound `det >= pure_det`.
pub const HEISENBERG_TOLERANCE: f64 = 1e-9;

/// Dimensionless second moments `(<q^2>, <(qp + pq)/2>, <p^2>)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub qq: f64,
    pub qp: f64,
    pub pp: f64,
}

impl MomentVector {
    /// Checked constructor: positive diagonal and `qq pp - qp^2 >= 1/4`.
    pub fn new(qq: f64, qp: f64, pp: f64) -> Result<Self> {
        let v = MomentVector { qq, qp, pp };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.qq, self.qp, self.pp].iter().all(|x| x.is_finite()) {
            return Err(Error::domain(format!("non-finite moments {self:?}")));
        }
        if self.qq <= 0.0 || self.pp <= 0.0 {
            return Err(Error::domain(format!("moments must have qq, pp > 0: {self:?}")));
        }
        let bound = 0.25 * (1.0 - HEISENBERG_TOLERANCE);
        if self.determinant() < bound {
            return Err(Error::domain(format!(
                "moments violate the uncertainty bound: det = {:.12e}",
                self.determinant()
            )));
        }
        Ok(())
    }

    pub fn determinant(&self) -> f64 {
        det2(&Mat2::new(self.qq, self.qp, self.qp, self.pp))
    }

    pub fn to_vec3(self) -> Vec3 {
        Vec3::new(self.qq, self.qp, self.pp)
    }

    /// Unchecked conversion from the dynamics' state vector.
    pub fn from_vec3(v: &Vec3) -> Self {
        MomentVector { qq: v[0], qp: v[1], pp: v[2] }
    }
}

/// Covariance normalization; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Convention {
    /// Vacuum covariance `diag(1/2, 1/2)`.
    Moment,
    /// Vacuum covariance is the identity.
    Qfi,
}

impl Convention {
    /// Determinant of any pure state.
    pub fn pure_determinant(self) -> f64 {
        match self {
            Convention::Moment => 0.25,
            Convention::Qfi => 1.0,
        }
    }

    /// Factor applied to covariance entries when converting `self -> to`.
    fn covariance_scale(self, to: Convention) -> f64 {
        match (self, to) {
            (Convention::Moment, Convention::Qfi) => 2.0,
            (Convention::Qfi, Convention::Moment) => 0.5,
            _ => 1.0,
        }
    }
}

/// Symmetric 2x2 quadrature covariance with an explicit normalization tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
    pub convention: Convention,
}

impl CovarianceMatrix {
    /// Checked constructor: positive-definite and above the pure-state
    /// determinant of `convention` (within [`HEISENBERG_TOLERANCE`]).
    pub fn new(s11: f64, s12: f64, s22: f64, convention: Convention) -> Result<Self> {
        let cov = CovarianceMatrix { s11, s12, s22, convention };
        if ![s11, s12, s22].iter().all(|x| x.is_finite()) {
            return Err(Error::domain(format!("non-finite covariance {cov:?}")));
        }
        let det = cov.determinant();
        if s11 <= 0.0 || s22 <= 0.0 || det <= 0.0 {
            return Err(Error::domain(format!(
                "covariance is not positive definite: {cov:?}, det = {det:.6e}"
            )));
        }
        if det < convention.pure_determinant() * (1.0 - HEISENBERG_TOLERANCE) {
            return Err(Error::domain(format!(
                "covariance violates the uncertainty bound: det = {det:.12e} < {}",
                convention.pure_determinant()
            )));
        }
        Ok(cov)
    }

    pub fn vacuum(convention: Convention) -> Self {
        let s = convention.pure_determinant().sqrt();
        CovarianceMatrix { s11: s, s12: 0.0, s22: s, convention }
    }

    pub fn determinant(&self) -> f64 {
        det2(&self.matrix())
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::new(self.s11, self.s12, self.s12, self.s22)
    }

    /// Exact doubling (moment -> QFI) or halving (QFI -> moment).
    pub fn to_convention(self, convention: Convention) -> Self {
        let f = self.convention.covariance_scale(convention);
        CovarianceMatrix {
            s11: self.s11 * f,
            s12: self.s12 * f,
            s22: self.s22 * f,
            convention,
        }
    }

    pub(crate) fn inverse(&self) -> Result<Mat2> {
        let det = self.determinant();
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::numeric(format!("singular covariance, det = {det:.3e}")));
        }
        Ok(Mat2::new(self.s22, -self.s12, -self.s12, self.s11) / det)
    }
}

/// A Gaussian state: first moments plus covariance. The mean is expressed
/// in the quadrature scaling of `cov.convention`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSnapshot {
    pub mean: [f64; 2],
    pub cov: CovarianceMatrix,
}

impl GaussianSnapshot {
    /// Zero-mean state, which is every state the resonator model produces.
    pub fn centered(cov: CovarianceMatrix) -> Self {
        GaussianSnapshot { mean: [0.0, 0.0], cov }
    }

    pub fn with_mean(cov: CovarianceMatrix, mean: [f64; 2]) -> Self {
        GaussianSnapshot { mean, cov }
    }

    /// Converts covariance and mean; quadratures (and so means) scale by
    /// `sqrt(2)` from the moment to the QFI normalization.
    pub fn to_convention(self, convention: Convention) -> Self {
        let f = self.cov.convention.covariance_scale(convention).sqrt();
        GaussianSnapshot {
            mean: [self.mean[0] * f, self.mean[1] * f],
            cov: self.cov.to_convention(convention),
        }
    }
}

/// Moments of the thermal state with mean occupation `n_th`.
pub fn thermal_moments(n_th: f64) -> Result<MomentVector> {
    if !n_th.is_finite() || n_th < 0.0 {
        return Err(Error::domain(format!(
            "thermal occupation must be finite and >= 0, got {n_th}"
        )));
    }
    Ok(MomentVector { qq: n_th + 0.5, qp: 0.0, pp: n_th + 0.5 })
}

/// Bose–Einstein occupation and its high-temperature approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalOccupation {
    pub exact: f64,
    /// `k_B T / (hbar omega)`.
    pub high_temperature: f64,
}

pub fn occupation_from_temperature(temperature: f64, omega_m: f64) -> Result<ThermalOccupation> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::domain(format!("temperature must be > 0 K, got {temperature}")));
    }
    if !(omega_m > 0.0) || !omega_m.is_finite() {
        return Err(Error::domain(format!("omega_m must be > 0 rad/s, got {omega_m}")));
    }
    let x = HBAR * omega_m / (K_B * temperature);
    Ok(ThermalOccupation {
        exact: 1.0 / x.exp_m1(),
        high_temperature: 1.0 / x,
    })
}

pub fn moments_to_covariance(v: MomentVector, convention: Convention) -> CovarianceMatrix {
    CovarianceMatrix {
        s11: v.qq,
        s12: v.qp,
        s22: v.pp,
        convention: Convention::Moment,
    }
    .to_convention(convention)
}

/// `Tr(rho^2)`: `det^{-1/2}` in the QFI normalization.
pub fn purity(cov: &CovarianceMatrix) -> Result<f64> {
    let det = cov.to_convention(Convention::Qfi).determinant();
    if !(det > 0.0) || cov.s11 <= 0.0 || cov.s22 <= 0.0 {
        return Err(Error::domain(format!("purity of a non-positive-definite covariance {cov:?}")));
    }
    Ok(det.sqrt().recip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn thermal_moment_examples() {
        assert_eq!(thermal_moments(0.0).unwrap(), MomentVector { qq: 0.5, qp: 0.0, pp: 0.5 });
        assert_eq!(thermal_moments(100.0).unwrap().qq, 100.5);
        assert_eq!(thermal_moments(1.5).unwrap().pp, 2.0);
        assert!(thermal_moments(-0.1).is_err());
        assert!(thermal_moments(f64::NAN).is_err());
    }

    #[test]
    fn occupation_at_unit_ratio() {
        // choose T so that hbar omega / (k_B T) = 1
        let omega = 1e6;
        let t = HBAR * omega / K_B;
        let n = occupation_from_temperature(t, omega).unwrap();
        assert_relative_eq!(n.exact, 1.0 / (std::f64::consts::E - 1.0), max_relative = 1e-12);
        assert_relative_eq!(n.exact, 0.581_976_706_869_326_4, max_relative = 1e-12);
    }

    #[test]
    fn occupation_vanishes_when_cold() {
        let n = occupation_from_temperature(1e-9, 0.5e6).unwrap();
        assert!(n.exact < 1e-100);
    }

    #[test]
    fn occupation_room_temperature_matches_high_t() {
        let n = occupation_from_temperature(300.0, 0.5e6).unwrap();
        assert!(((n.exact - n.high_temperature) / n.exact).abs() < 1e-4);
        // k_B T / (hbar omega) ~ 7.9e7
        assert!(n.exact > 7e7 && n.exact < 9e7);
    }

    #[test]
    fn occupation_rejects_bad_inputs() {
        assert!(occupation_from_temperature(0.0, 1.0).is_err());
        assert!(occupation_from_temperature(-3.0, 1.0).is_err());
        assert!(occupation_from_temperature(3.0, 0.0).is_err());
    }

    #[test]
    fn covariance_conventions() {
        let vac = moments_to_covariance(thermal_moments(0.0).unwrap(), Convention::Qfi);
        assert_eq!((vac.s11, vac.s12, vac.s22), (1.0, 0.0, 1.0));
        let th = moments_to_covariance(thermal_moments(100.0).unwrap(), Convention::Qfi);
        assert_eq!((th.s11, th.s12, th.s22), (201.0, 0.0, 201.0));
        let kicked = MomentVector::new(100.5, -201.0, 502.5).unwrap();
        let c = moments_to_covariance(kicked, Convention::Moment);
        assert_eq!((c.s11, c.s12, c.s22), (100.5, -201.0, 502.5));
    }

    #[test]
    fn purity_examples() {
        assert_relative_eq!(purity(&CovarianceMatrix::vacuum(Convention::Moment)).unwrap(), 1.0);
        assert_relative_eq!(purity(&CovarianceMatrix::vacuum(Convention::Qfi)).unwrap(), 1.0);
        let th = moments_to_covariance(thermal_moments(100.0).unwrap(), Convention::Moment);
        assert_relative_eq!(purity(&th).unwrap(), 1.0 / 201.0, max_relative = 1e-14);
        // after one theta = 1 kick the determinant is unchanged
        let kicked = moments_to_covariance(MomentVector::new(100.5, -201.0, 502.5).unwrap(), Convention::Qfi);
        assert_relative_eq!(purity(&kicked).unwrap(), 1.0 / 201.0, max_relative = 1e-14);
    }

    #[test]
    fn unphysical_inputs_rejected() {
        assert!(MomentVector::new(0.4, 0.0, 0.4).is_err());
        assert!(MomentVector::new(-1.0, 0.0, 3.0).is_err());
        assert!(CovarianceMatrix::new(1.0, 2.0, 1.0, Convention::Qfi).is_err());
        assert!(CovarianceMatrix::new(0.9, 0.0, 0.9, Convention::Qfi).is_err());
        assert!(CovarianceMatrix::new(0.9, 0.0, 0.9, Convention::Moment).is_ok());
    }

    #[test]
    fn snapshot_mean_scales_with_quadratures() {
        let s = GaussianSnapshot::with_mean(CovarianceMatrix::vacuum(Convention::Moment), [1.0, -2.0]);
        let q = s.to_convention(Convention::Qfi);
        assert_relative_eq!(q.mean[0], 2f64.sqrt());
        assert_relative_eq!(q.to_convention(Convention::Moment).mean[1], -2.0, max_relative = 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn physical_cov() -> impl Strategy<Value = CovarianceMatrix> {
            (0.5f64..50.0, 0.0f64..3.0, -1.5f64..1.5).prop_map(|(m, r, a)| {
                let (c, s) = (a.cos(), a.sin());
                let (l1, l2) = (m * (-2.0 * r).exp(), m * (2.0 * r).exp());
                CovarianceMatrix {
                    s11: l1 * c * c + l2 * s * s,
                    s12: (l1 - l2) * c * s,
                    s22: l1 * s * s + l2 * c * c,
                    convention: Convention::Moment,
                }
            })
        }

        proptest! {
            #[test]
            fn convention_round_trip_is_exact(cov in physical_cov()) {
                let back = cov.to_convention(Convention::Qfi).to_convention(Convention::Moment);
                prop_assert_eq!(back, cov);
            }

            #[test]
            fn purity_in_unit_interval(cov in physical_cov()) {
                let p = purity(&cov).unwrap();
                prop_assert!(p > 0.0 && p <= 1.0 + 1e-12);
                let p2 = purity(&cov.to_convention(Convention::Qfi)).unwrap();
                prop_assert!((p - p2).abs() <= 1e-15);
            }
        }
    }
}
