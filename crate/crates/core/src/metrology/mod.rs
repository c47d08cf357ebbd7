//! Frequency estimation with the kicked resonator: moment sensitivities,
//! QFI and squeezing versus pulse number, mass scaling, power-law fits and
//! parameter sweeps.
//!
//! All derivatives are taken with respect to `omega_m` at fixed pulse period,
//! and QFI values are in `(s/rad)^2`.

mod fit;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::dynamics::{exact_sensitivities, stroboscopic, CycleMap, SystemParams};
use crate::error::{Error, Result};
use crate::gaussian::{
    bures_step_for, moments_to_covariance, purity, qfi_bures_central, qfi_single_mode,
    squeezing_decomposition, BuresEstimate, BuresOptions, Convention, CovarianceDerivative,
    GaussianSnapshot, MomentVector,
};
use crate::linalg::Vec3;

pub use fit::{fit_scaling_exponent, saturation, FitResult, SaturationPoint, WindowPolicy};
pub use sweep::{sweep, Quantity, QuantityValue, SweepAxis, SweepPoint, SweepSpec};

/// Default relative frequency step. Near resonance the moments grow by
/// orders of magnitude over a thousand pulses and larger steps leave the
/// linear regime.
pub const DEFAULT_H_REL: f64 = 1e-9;
/// Largest accepted relative gap between the `h` and `h/2` central
/// differences.
pub const SENSITIVITY_TOLERANCE: f64 = 1e-3;
/// Smallest `det / (s11 s22)` for which the covariance is resolvable in
/// double precision; below it the determinant is pure cancellation.
pub const MIN_RESOLVABLE_DET_RATIO: f64 = 1e-12;
/// Rounding floor of a central difference, in units of `eps |v| / (omega h)`;
/// the propagator itself is only accurate to ~1e-13 relative.
const ROUNDING_FLOOR: f64 = 1e5;

/// `dv/d omega_m` from step halving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    /// Richardson value `(4 D(h/2) - D(h)) / 3`.
    pub derivative: Vec3,
    pub coarse: Vec3,
    pub fine: Vec3,
    pub discrepancy: f64,
}

/// How `Sigma'` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SensitivityMethod {
    /// Central differences of the whole pipeline with Richardson
    /// verification.
    FiniteDifference { h_rel: f64 },
    /// Forward propagation of the derivative through the cycle recursion.
    Exact,
}

impl Default for SensitivityMethod {
    fn default() -> Self {
        SensitivityMethod::FiniteDifference { h_rel: DEFAULT_H_REL }
    }
}

fn check_h_rel(h_rel: f64) -> Result<()> {
    if !(h_rel > 1e-10 && h_rel < 1e-2) {
        return Err(Error::domain(format!("h_rel must lie in (1e-10, 1e-2), got {h_rel}")));
    }
    Ok(())
}

/// Moments `v_0..=v_n_max` and their finite-difference sensitivities.
pub fn fd_sensitivities(
    params: &SystemParams,
    v0: &MomentVector,
    n_max: usize,
    h_rel: f64,
) -> Result<Vec<(Vec3, Sensitivity)>> {
    check_h_rel(h_rel)?;
    let w = params.omega_m;
    let x0 = v0.to_vec3();
    let run = |scale: f64| CycleMap::new(&params.with_omega(w * scale))?.iterate(&x0, n_max);
    let base = run(1.0)?;
    let (p1, m1) = (run(1.0 + h_rel)?, run(1.0 - h_rel)?);
    let (p2, m2) = (run(1.0 + 0.5 * h_rel)?, run(1.0 - 0.5 * h_rel)?);

    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let coarse = (p1[n] - m1[n]) / (2.0 * w * h_rel);
        let fine = (p2[n] - m2[n]) / (w * h_rel);
        let derivative = (4.0 * fine - coarse) / 3.0;
        let floor = ROUNDING_FLOOR * f64::EPSILON * base[n].norm() / (w * h_rel);
        let gap = (coarse - fine).norm();
        let discrepancy = if gap == 0.0 { 0.0 } else { gap / derivative.norm().max(floor) };
        if discrepancy > SENSITIVITY_TOLERANCE {
            return Err(Error::Unreliable {
                what: "moment sensitivity",
                coarse: coarse.norm(),
                fine: fine.norm(),
                discrepancy,
            });
        }
        out.push((base[n], Sensitivity { derivative, coarse, fine, discrepancy }));
    }
    Ok(out)
}

/// `dv/d omega_m` after `n` cycles from the thermal state.
pub fn moment_sensitivity(params: &SystemParams, n: usize, h_rel: f64) -> Result<Sensitivity> {
    let v0 = params.thermal_state()?;
    let mut all = fd_sensitivities(params, &v0, n, h_rel)?;
    Ok(all.pop().expect("n + 1 rows").1)
}

/// Moments and `omega_m` derivatives for `n = 0..=n_max`.
pub fn sensitivities(
    params: &SystemParams,
    v0: &MomentVector,
    n_max: usize,
    method: SensitivityMethod,
) -> Result<Vec<(Vec3, Vec3)>> {
    match method {
        SensitivityMethod::FiniteDifference { h_rel } => Ok(fd_sensitivities(params, v0, n_max, h_rel)?
            .into_iter()
            .map(|(v, s)| (v, s.derivative))
            .collect()),
        SensitivityMethod::Exact => exact_sensitivities(params, &v0.to_vec3(), n_max),
    }
}

/// One row of a QFI trajectory, for the state after `n` full cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QfiRow {
    pub n: u64,
    pub f: f64,
    pub r: f64,
    pub phi: Option<f64>,
    pub purity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfiTrajectory {
    pub rows: Vec<QfiRow>,
}

impl QfiTrajectory {
    pub fn max_f(&self) -> f64 {
        self.rows.iter().map(|r| r.f).fold(0.0, f64::max)
    }

    /// Row with pulse number `n`; rows are sorted by `n`.
    pub fn at(&self, n: u64) -> Option<&QfiRow> {
        self.rows.binary_search_by_key(&n, |r| r.n).ok().map(|i| &self.rows[i])
    }
}

/// QFI of the zero-mean state with moments `v` and derivative `dv`.
pub fn qfi_from_moments(v: &Vec3, dv: &Vec3) -> Result<f64> {
    let cov = moments_to_covariance(MomentVector::from_vec3(v), Convention::Moment);
    let dcov = CovarianceDerivative { d11: dv[0], d12: dv[1], d22: dv[2] };
    qfi_single_mode(&cov, &dcov, [0.0, 0.0])
}

/// QFI, squeezing and purity after each of `n = 1..=n_max` cycles from the
/// thermal state of the bath.
pub fn qfi_vs_pulses(params: &SystemParams, n_max: usize, method: SensitivityMethod) -> Result<QfiTrajectory> {
    qfi_vs_pulses_from(params, &params.thermal_state()?, n_max, method)
}

pub fn qfi_vs_pulses_from(
    params: &SystemParams,
    v0: &MomentVector,
    n_max: usize,
    method: SensitivityMethod,
) -> Result<QfiTrajectory> {
    if n_max < 1 {
        return Err(Error::domain("n_max must be >= 1"));
    }
    let data = sensitivities(params, v0, n_max, method)?;
    let rows = data
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, (v, dv))| {
            let ratio = MomentVector::from_vec3(v).determinant() / (v[0] * v[2]);
            if !(ratio >= MIN_RESOLVABLE_DET_RATIO) {
                return Err(Error::numeric(format!(
                    "state after {n} pulses is too squeezed to resolve: det/(qq pp) = {ratio:.3e}"
                )));
            }
            let cov = moments_to_covariance(MomentVector::from_vec3(v), Convention::Moment);
            let sq = squeezing_decomposition(&cov)?;
            Ok(QfiRow { n: n as u64, f: qfi_from_moments(v, dv)?, r: sq.r, phi: sq.phi, purity: purity(&cov)? })
        })
        .collect::<Result<_>>()?;
    Ok(QfiTrajectory { rows })
}

/// Where in the cycle a squeezing sample is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Sampling {
    /// Just after the `n`-th kick, `K v((n-1) tau)`.
    #[default]
    AfterKick,
    /// At `t = n tau`, just before the next kick (the stroboscopic state).
    BeforeKick,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingRow {
    pub n: u64,
    pub r: f64,
    pub phi: Option<f64>,
}

/// Squeezing strength and angle for `n = 1..=n_max` from the thermal state.
pub fn squeezing_trajectory(params: &SystemParams, n_max: usize, sampling: Sampling) -> Result<Vec<SqueezingRow>> {
    if n_max < 1 {
        return Err(Error::domain("n_max must be >= 1"));
    }
    let map = CycleMap::new(params)?;
    let states = map.iterate(&params.thermal_state()?.to_vec3(), n_max)?;
    (1..=n_max)
        .map(|n| {
            let v = match sampling {
                Sampling::AfterKick => map.kick * states[n - 1],
                Sampling::BeforeKick => states[n],
            };
            let sq = squeezing_decomposition(&moments_to_covariance(MomentVector::from_vec3(&v), Convention::Moment))?;
            Ok(SqueezingRow { n: n as u64, r: sq.r, phi: sq.phi })
        })
        .collect()
}

/// QFI for the mass, `F_M = mu F_omega` with `mu = k_m / (4 M^3)`.
pub fn mass_qfi(f_omega: f64, k_m: f64, mass: f64) -> Result<f64> {
    if !(k_m > 0.0) || !(mass > 0.0) || !k_m.is_finite() || !mass.is_finite() {
        return Err(Error::domain(format!("k_m and M must be finite and > 0, got {k_m}, {mass}")));
    }
    Ok(k_m / (4.0 * mass * mass * mass) * f_omega)
}

/// Bures-distance estimate of the QFI after `n` cycles: the independent
/// oracle for [`qfi_vs_pulses`].
/// Infidelity the Bures oracle aims its step at: large enough to sit well
/// above covariance rounding, small enough for the extrapolated central
/// difference to be accurate to ~1e-6.
const ORACLE_INFIDELITY: f64 = 3e-4;

pub fn qfi_bures_oracle(params: &SystemParams, n: u64) -> Result<BuresEstimate> {
    let v0 = params.thermal_state()?;
    let w = params.omega_m;
    let state_at = |dw: f64| -> Result<GaussianSnapshot> {
        let v = stroboscopic(&v0, &params.with_omega(w + dw), n)?;
        Ok(GaussianSnapshot::centered(moments_to_covariance(v, Convention::Moment)))
    };
    let h = bures_step_for(state_at, 0.0, w * 1e-8, ORACLE_INFIDELITY)?;
    qfi_bures_central(state_at, 0.0, h, BuresOptions::default())
}
