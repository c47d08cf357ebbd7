//! Second-moment dynamics of the kicked resonator.
//!
//! Between pulses the moments `v = (<q^2>, <(qp + pq)/2>, <p^2>)` obey
//! `dv/dt = U v + N` with the damped-rotation drift `U` and the thermal noise
//! vector `N`. A pulse acts instantaneously as `q -> q`, `p -> p - 2 theta q`,
//! i.e. `v -> K(theta) v`. One cycle of period `tau` is a kick followed by
//! free flight: `v' = M(tau) K v + v_inh(tau)`.

pub mod monte_carlo;
mod regime;
mod sensitivity;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{thermal_moments, MomentVector};
use crate::linalg::{
    condition_number, expm3, matrix_power, solve_identity_minus, spectral_radius, DdVec3, Mat3,
    Vec3,
};

pub use regime::{validate_regime, RegimeCheck, RegimeCondition, RegimeStatus, DEFAULT_REGIME_FACTOR};
pub use sensitivity::{exact_sensitivities, SensitivityMap};

/// Largest `cond_1(I - M K)` for which the geometric-series closed form is
/// used; beyond it the cycle map is iterated in compensated arithmetic.
pub const CLOSED_FORM_MAX_COND: f64 = 1e6;
/// Above this condition number the closed form is cross-checked against
/// iteration (for moderate `n`).
const CROSS_CHECK_COND: f64 = 1e3;
const CROSS_CHECK_MAX_PULSES: u64 = 100_000;
/// Allowed disagreement between the two stroboscopic routes.
pub const DUAL_PATH_TOLERANCE: f64 = 1e-6;

/// Physical parameters of the resonator and pulse train.
///
/// The pulse period `tau` is stored directly, so changing `omega_m` (as the
/// frequency derivative does) keeps the pulse timing fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Mechanical frequency, rad/s.
    pub omega_m: f64,
    /// Mechanical damping rate, 1/s.
    pub gamma_m: f64,
    /// Thermal occupation of the bath.
    pub n_th: f64,
    /// Kick strength.
    pub theta: f64,
    /// Pulse period, s.
    pub tau: f64,
    /// Cavity decay rate, 1/s (regime checks only).
    pub kappa: Option<f64>,
    /// Pulse duration, s (regime checks only).
    pub tau_p: Option<f64>,
    /// Cavity length, m (regime checks only).
    pub cavity_length: Option<f64>,
}

impl Default for SystemParams {
    /// omega_m = 0.5e6 rad/s, gamma_m = 100/s, n_th = 100, theta = 1, k = 1,
    /// kappa = 1e11/s, tau_p = 1e-10 s.
    fn default() -> Self {
        let omega_m = 0.5e6;
        SystemParams {
            omega_m,
            gamma_m: 100.0,
            n_th: 100.0,
            theta: 1.0,
            tau: TAU / omega_m,
            kappa: Some(1e11),
            tau_p: Some(1e-10),
            cavity_length: None,
        }
    }
}

impl SystemParams {
    /// Parameters with `tau = T0 / k`.
    pub fn new(omega_m: f64, gamma_m: f64, n_th: f64, theta: f64, k: f64) -> Result<Self> {
        let p = SystemParams {
            omega_m,
            gamma_m,
            n_th,
            theta,
            tau: TAU / omega_m / k,
            kappa: None,
            tau_p: None,
            cavity_length: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.omega_m, self.gamma_m, self.n_th, self.theta, self.tau]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::domain(format!("non-finite parameters {self:?}")));
        }
        if self.omega_m <= 0.0 {
            return Err(Error::domain(format!("omega_m must be > 0, got {}", self.omega_m)));
        }
        if self.gamma_m < 0.0 {
            return Err(Error::domain(format!("gamma_m must be >= 0, got {}", self.gamma_m)));
        }
        if self.n_th < 0.0 {
            return Err(Error::domain(format!("n_th must be >= 0, got {}", self.n_th)));
        }
        if self.tau <= 0.0 {
            return Err(Error::domain(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.k() > 0.0 && self.k().is_finite()) {
            return Err(Error::domain(format!("k = T0/tau must be finite and > 0, got {}", self.k())));
        }
        if !(0.01..=10.0).contains(&self.theta.abs()) && self.theta != 0.0 {
            log::debug!("kick strength {} outside the usual range (0.01, 10)", self.theta);
        }
        Ok(())
    }

    /// Mechanical period `T0 = 2 pi / omega_m`.
    pub fn period(&self) -> f64 {
        TAU / self.omega_m
    }

    /// Pulses per mechanical period, `k = T0 / tau`.
    pub fn k(&self) -> f64 {
        self.period() / self.tau
    }

    pub fn with_k(self, k: f64) -> Self {
        SystemParams { tau: self.period() / k, ..self }
    }

    pub fn with_theta(self, theta: f64) -> Self {
        SystemParams { theta, ..self }
    }

    pub fn with_gamma(self, gamma_m: f64) -> Self {
        SystemParams { gamma_m, ..self }
    }

    pub fn with_n_th(self, n_th: f64) -> Self {
        SystemParams { n_th, ..self }
    }

    /// Changes the frequency at fixed pulse period.
    pub fn with_omega(self, omega_m: f64) -> Self {
        SystemParams { omega_m, ..self }
    }

    /// Thermal initial state of the bath occupation.
    pub fn thermal_state(&self) -> Result<MomentVector> {
        thermal_moments(self.n_th)
    }
}

/// Drift matrix with frequency shift `a` on the position coefficient of the
/// momentum equation (`omega~ = omega_m + a`).
pub fn drift_matrix(omega_m: f64, gamma_m: f64, a: f64) -> Mat3 {
    let w = omega_m;
    let wt = omega_m + a;
    Mat3::new(
        0.0, 2.0 * w, 0.0,
        -wt, -gamma_m, w,
        0.0, -2.0 * wt, -2.0 * gamma_m,
    )
}

/// `d U / d omega_m` at `a = 0`.
pub(crate) fn drift_derivative() -> Mat3 {
    Mat3::new(0.0, 2.0, 0.0, -1.0, 0.0, 1.0, 0.0, -2.0, 0.0)
}

pub fn noise_vector(n_th: f64, gamma_m: f64) -> Vec3 {
    Vec3::new(0.0, 0.0, (2.0 * n_th + 1.0) * gamma_m)
}

pub fn kick_matrix(theta: f64) -> Mat3 {
    Mat3::new(
        1.0, 0.0, 0.0,
        -2.0 * theta, 1.0, 0.0,
        4.0 * theta * theta, -4.0 * theta, 1.0,
    )
}

/// Free evolution over a fixed time: `v(t) = m v(0) + v_inh`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorPair {
    pub m: Mat3,
    pub v_inh: Vec3,
}

impl PropagatorPair {
    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.m * v + self.v_inh
    }
}

/// Free evolution (no kick) over time `t`. The inhomogeneous part is
/// `U^-1 (M - I) N`, the integral of `exp(U s) N` over `[0, t]`; it vanishes
/// without damping since then `N = 0`.
pub fn free_propagator(params: &SystemParams, t: f64) -> Result<PropagatorPair> {
    let u = drift_matrix(params.omega_m, params.gamma_m, 0.0);
    let m = expm3(&u, t)?;
    let v_inh = if params.gamma_m == 0.0 {
        Vec3::zeros()
    } else {
        let n = noise_vector(params.n_th, params.gamma_m);
        u.lu()
            .solve(&((m - Mat3::identity()) * n))
            .ok_or_else(|| Error::numeric("singular drift matrix"))?
    };
    Ok(PropagatorPair { m, v_inh })
}

/// The affine map of one kick-then-free-flight cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleMap {
    /// Free propagator over one period `tau`.
    pub free: PropagatorPair,
    pub kick: Mat3,
    /// `M(tau) K(theta)`.
    pub a: Mat3,
}

impl CycleMap {
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let free = free_propagator(params, params.tau)?;
        let kick = kick_matrix(params.theta);
        Ok(CycleMap { free, kick, a: free.m * kick })
    }

    pub fn v_inh(&self) -> Vec3 {
        self.free.v_inh
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.a * v + self.free.v_inh
    }

    /// `cond_1(I - M K)`.
    pub fn condition(&self) -> f64 {
        condition_number(&(Mat3::identity() - self.a))
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.a)
    }

    /// States `v_0, v_1, ..., v_n_max` after each full cycle, iterated with
    /// compensated accumulation.
    pub fn iterate(&self, v0: &Vec3, n_max: usize) -> Result<Vec<Vec3>> {
        let mut out = Vec::with_capacity(n_max + 1);
        let mut v = DdVec3::new(*v0);
        out.push(*v0);
        for n in 1..=n_max {
            v = v.affine(&self.a, &self.free.v_inh);
            let value = v.value();
            if !value.iter().all(|x| x.is_finite()) {
                return Err(Error::numeric(format!("moments overflow after {n} pulses")));
            }
            out.push(value);
        }
        Ok(out)
    }

    fn iterate_to(&self, v0: &Vec3, n: u64) -> Result<Vec3> {
        let mut v = DdVec3::new(*v0);
        for i in 0..n {
            v = v.affine(&self.a, &self.free.v_inh);
            if i % 1024 == 0 && !v.hi.iter().all(|x| x.is_finite()) {
                break;
            }
        }
        let value = v.value();
        if !value.iter().all(|x| x.is_finite()) {
            return Err(Error::numeric(format!("moments overflow within {n} pulses")));
        }
        Ok(value)
    }

    /// `(MK)^n v0 + [I - (MK)^n] (I - MK)^-1 v_inh`.
    fn closed_form(&self, v0: &Vec3, n: u64) -> Result<Vec3> {
        let an = matrix_power(&self.a, n);
        let fixed = solve_identity_minus(&self.a, &self.free.v_inh)?;
        let v = an * v0 + (fixed - an * fixed);
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::numeric(format!("moments overflow within {n} pulses")));
        }
        Ok(v)
    }
}

/// One cycle: kick, then free evolution over `tau`.
pub fn step(v: &MomentVector, params: &SystemParams) -> Result<MomentVector> {
    let map = CycleMap::new(params)?;
    Ok(MomentVector::from_vec3(&map.apply(&v.to_vec3())))
}

/// Moments after `n` cycles.
///
/// Uses the geometric-series closed form when `I - MK` is well conditioned
/// and compensated iteration otherwise (near resonance the closed form loses
/// `log10 cond` digits). In the intermediate band both routes run and must
/// agree to [`DUAL_PATH_TOLERANCE`].
pub fn stroboscopic(v0: &MomentVector, params: &SystemParams, n: u64) -> Result<MomentVector> {
    if n == 0 {
        return Ok(*v0);
    }
    let map = CycleMap::new(params)?;
    let x0 = v0.to_vec3();
    let cond = map.condition();
    let v = if cond <= CLOSED_FORM_MAX_COND {
        let closed = map.closed_form(&x0, n)?;
        if cond > CROSS_CHECK_COND && n <= CROSS_CHECK_MAX_PULSES {
            let iterated = map.iterate_to(&x0, n)?;
            let gap = (closed - iterated).norm() / closed.norm().max(iterated.norm());
            if gap > DUAL_PATH_TOLERANCE {
                return Err(Error::Consistency(format!(
                    "stroboscopic closed form and iteration differ by {gap:.3e} (cond {cond:.3e}, n = {n})"
                )));
            }
        }
        closed
    } else {
        map.iterate_to(&x0, n)?
    };
    Ok(MomentVector::from_vec3(&v))
}

/// Large-`n` limit of the stroboscopic moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SteadyState {
    Converged(MomentVector),
    /// `M K` has spectral radius >= 1: no attracting fixed point.
    Divergent { spectral_radius: f64 },
}

/// Margin below 1 that counts as a contraction.
const CONTRACTION_MARGIN: f64 = 1e-12;

pub fn steady_moments(params: &SystemParams) -> Result<SteadyState> {
    let map = CycleMap::new(params)?;
    let rho = map.spectral_radius();
    if rho >= 1.0 - CONTRACTION_MARGIN || !rho.is_finite() {
        return Ok(SteadyState::Divergent { spectral_radius: rho });
    }
    let v = solve_identity_minus(&map.a, &map.free.v_inh)?;
    Ok(SteadyState::Converged(MomentVector::from_vec3(&v)))
}
