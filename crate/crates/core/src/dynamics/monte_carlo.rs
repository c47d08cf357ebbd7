//! Langevin trajectory oracle for the moment equations.
//!
//! Each trajectory integrates `dq = omega p dt`,
//! `dp = (-omega q - gamma p) dt + sigma dW` between pulses and applies
//! `p -> p - 2 theta q` at every pulse. The linear SDE is stepped with its
//! exact one-step transition: the deterministic flow `exp(D dt)` plus a
//! Gaussian increment with the exact step covariance (Van Loan's block
//! exponential). This is the exponential Euler scheme with the noise
//! integrated exactly, so the zero-noise flow is a pure rotation.

use nalgebra::{Matrix2, SMatrix, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SystemParams;
use crate::error::{Error, Result};
use crate::gaussian::MomentVector;
use crate::linalg::{expm, CompensatedSum};

pub const MIN_TRAJECTORIES: usize = 100;
/// Smallest number of integration steps per mechanical period.
pub const MIN_STEPS_PER_PERIOD: usize = 10_000;
/// `q^2 + p^2` beyond this is treated as a blowup.
const BLOWUP: f64 = 1e150;

/// Diffusion coefficient `sigma^2` of the momentum noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NoiseModel {
    /// `2 n_th gamma`: the high-temperature bath correlator. The vacuum
    /// contribution enters only through the initial state.
    #[default]
    HighTemperature,
    /// `(2 n_th + 1) gamma`, matching the moment equations exactly.
    QuantumConsistent,
    /// Deterministic flow.
    None,
}

impl NoiseModel {
    pub fn diffusion(self, n_th: f64, gamma_m: f64) -> f64 {
        match self {
            NoiseModel::HighTemperature => 2.0 * n_th * gamma_m,
            NoiseModel::QuantumConsistent => (2.0 * n_th + 1.0) * gamma_m,
            NoiseModel::None => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub trajectories: usize,
    pub seed: u64,
    pub noise: NoiseModel,
    pub steps_per_period: usize,
    /// Jackknife blocks.
    pub blocks: usize,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            trajectories: 10_000,
            seed: 0,
            noise: NoiseModel::default(),
            steps_per_period: MIN_STEPS_PER_PERIOD,
            blocks: 100,
        }
    }
}

/// Ensemble second moments with grouped-jackknife standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub moments: MomentVector,
    /// Standard errors of `(qq, qp, pp)`.
    pub std_err: [f64; 3],
    pub trajectories: usize,
}

impl McEstimate {
    /// Largest componentwise `|mc - reference| / std_err`.
    pub fn max_z_score(&self, reference: &MomentVector) -> f64 {
        let mc = [self.moments.qq, self.moments.qp, self.moments.pp];
        let r = [reference.qq, reference.qp, reference.pp];
        (0..3)
            .map(|i| (mc[i] - r[i]).abs() / self.std_err[i])
            .fold(0.0, f64::max)
    }
}

/// Exact one-step transition of the free Langevin flow.
struct Integrator {
    flow: Matrix2<f64>,
    /// Lower Cholesky factor of the step noise covariance.
    noise: Matrix2<f64>,
    noisy: bool,
    steps_per_pulse: usize,
    theta: f64,
    /// Lower Cholesky factor of the initial covariance.
    initial: Matrix2<f64>,
}

fn cholesky2(s11: f64, s12: f64, s22: f64) -> Matrix2<f64> {
    let l11 = s11.max(0.0).sqrt();
    let l21 = if l11 > 0.0 { s12 / l11 } else { 0.0 };
    let l22 = (s22 - l21 * l21).max(0.0).sqrt();
    Matrix2::new(l11, 0.0, l21, l22)
}

impl Integrator {
    fn new(params: &SystemParams, v0: &MomentVector, options: &McOptions) -> Result<Self> {
        let max_dt = params.period() / options.steps_per_period as f64;
        let steps = (params.tau / max_dt).ceil().max(1.0);
        if steps > 1e12 {
            return Err(Error::Integrator(format!("{steps:.3e} steps per pulse")));
        }
        let steps_per_pulse = steps as usize;
        let dt = params.tau / steps;
        let (w, g) = (params.omega_m, params.gamma_m);
        let drift = Matrix2::new(0.0, w, -w, -g);
        let sigma2 = options.noise.diffusion(params.n_th, g);

        // Van Loan: exp([[-D, G], [0, D^T]] dt) = [[., F^-1 Q], [0, F^T]]
        let mut block = SMatrix::<f64, 4, 4>::zeros();
        block.fixed_view_mut::<2, 2>(0, 0).copy_from(&(-drift * dt));
        block[(1, 3)] = sigma2 * dt;
        block.fixed_view_mut::<2, 2>(2, 2).copy_from(&(drift.transpose() * dt));
        let e = expm(&block)?;
        let flow: Matrix2<f64> = e.fixed_view::<2, 2>(2, 2).transpose();
        let q = flow * e.fixed_view::<2, 2>(0, 2);
        let q = (q + q.transpose()) * 0.5;

        Ok(Integrator {
            flow,
            noise: cholesky2(q[(0, 0)], q[(0, 1)], q[(1, 1)]),
            noisy: sigma2 > 0.0,
            steps_per_pulse,
            theta: params.theta,
            initial: cholesky2(v0.qq, v0.qp, v0.pp),
        })
    }

    fn gaussian_pair(rng: &mut ChaCha8Rng) -> Vector2<f64> {
        Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    fn sample_initial(&self, rng: &mut ChaCha8Rng) -> Vector2<f64> {
        self.initial * Self::gaussian_pair(rng)
    }

    /// Free flight over one pulse period.
    fn free_flight(&self, x: &mut Vector2<f64>, rng: &mut ChaCha8Rng) {
        for _ in 0..self.steps_per_pulse {
            *x = self.flow * *x;
            if self.noisy {
                *x += self.noise * Self::gaussian_pair(rng);
            }
        }
    }

    /// Kicks at `t = 0, tau, ..., (n - 1) tau`; returns the state at `n tau`.
    fn run(&self, mut x: Vector2<f64>, pulses: u64, rng: &mut ChaCha8Rng) -> Result<Vector2<f64>> {
        for i in 0..pulses {
            x[1] -= 2.0 * self.theta * x[0];
            self.free_flight(&mut x, rng);
            let e = x.norm_squared();
            if !e.is_finite() || e > BLOWUP {
                return Err(Error::Integrator(format!("trajectory blew up at pulse {}", i + 1)));
            }
        }
        Ok(x)
    }
}

fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Ensemble moments after `n_pulses` cycles from Gaussian initial samples
/// with moments `v0`. Reproducible from `options.seed` regardless of thread
/// scheduling: each trajectory owns a stream and the reduction runs in
/// trajectory order with compensated sums.
pub fn monte_carlo_moments(
    params: &SystemParams,
    v0: &MomentVector,
    n_pulses: u64,
    options: &McOptions,
) -> Result<McEstimate> {
    params.validate()?;
    v0.validate()?;
    if options.trajectories < MIN_TRAJECTORIES {
        return Err(Error::domain(format!(
            "need at least {MIN_TRAJECTORIES} trajectories, got {}",
            options.trajectories
        )));
    }
    if options.steps_per_period < MIN_STEPS_PER_PERIOD {
        return Err(Error::domain(format!(
            "need at least {MIN_STEPS_PER_PERIOD} steps per period, got {}",
            options.steps_per_period
        )));
    }
    if options.blocks < 2 || options.blocks > options.trajectories {
        return Err(Error::domain(format!("invalid jackknife block count {}", options.blocks)));
    }
    let integrator = Integrator::new(params, v0, options)?;

    let samples: Vec<[f64; 3]> = (0..options.trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(options.seed, i);
            let x0 = integrator.sample_initial(&mut rng);
            let x = integrator.run(x0, n_pulses, &mut rng)?;
            Ok([x[0] * x[0], x[0] * x[1], x[1] * x[1]])
        })
        .collect::<Result<_>>()?;

    let (moments, std_err) = jackknife(&samples, options.blocks);
    Ok(McEstimate {
        moments: MomentVector { qq: moments[0], qp: moments[1], pp: moments[2] },
        std_err,
        trajectories: options.trajectories,
    })
}

/// Sample means and grouped (delete-one-block) jackknife standard errors.
fn jackknife(samples: &[[f64; 3]], blocks: usize) -> ([f64; 3], [f64; 3]) {
    let n = samples.len();
    let mut block_sums = vec![[0.0; 3]; blocks];
    let mut block_sizes = vec![0usize; blocks];
    let mut total = [CompensatedSum::default(); 3];
    for (b, chunk) in samples.chunks(n.div_ceil(blocks)).enumerate() {
        let mut acc = [CompensatedSum::default(); 3];
        for s in chunk {
            for c in 0..3 {
                acc[c].add(s[c]);
                total[c].add(s[c]);
            }
        }
        block_sums[b] = [acc[0].value(), acc[1].value(), acc[2].value()];
        block_sizes[b] = chunk.len();
    }
    let used = block_sizes.iter().filter(|&&s| s > 0).count();
    let mut mean = [0.0; 3];
    let mut err = [0.0; 3];
    for c in 0..3 {
        let sum = total[c].value();
        mean[c] = sum / n as f64;
        let loo: Vec<f64> = (0..used)
            .map(|b| (sum - block_sums[b][c]) / (n - block_sizes[b]) as f64)
            .collect();
        let centre = loo.iter().sum::<f64>() / used as f64;
        let ss: f64 = loo.iter().map(|x| (x - centre).powi(2)).sum();
        err[c] = ((used - 1) as f64 / used as f64 * ss).sqrt();
    }
    (mean, err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::stroboscopic;

    #[test]
    fn zero_noise_conserves_energy_over_a_period() {
        let p = SystemParams::new(0.5e6, 0.0, 0.0, 0.0, 1.0).unwrap();
        let v0 = MomentVector::new(100.5, 0.0, 100.5).unwrap();
        let opts = McOptions { noise: NoiseModel::None, ..McOptions::default() };
        let integ = Integrator::new(&p, &v0, &opts).unwrap();
        assert_eq!(integ.steps_per_pulse, MIN_STEPS_PER_PERIOD);
        for i in 0..50 {
            let mut rng = trajectory_rng(3, i);
            let x0 = integ.sample_initial(&mut rng);
            let x = integ.run(x0, 1, &mut rng).unwrap();
            let (e0, e1) = (x0.norm_squared(), x.norm_squared());
            assert!(((e1 - e0) / e0).abs() <= 1e-6, "{e0} -> {e1}");
        }
    }

    #[test]
    fn step_noise_matches_moment_equations() {
        // with the quantum-consistent diffusion, the exact transition moments
        // equal one free step of the moment map
        let p = SystemParams::default().with_k(7.0);
        let v0 = MomentVector::new(3.0, 0.5, 2.0).unwrap();
        let opts = McOptions { noise: NoiseModel::QuantumConsistent, ..McOptions::default() };
        let integ = Integrator::new(&p, &v0, &opts).unwrap();
        let s = Matrix2::new(v0.qq, v0.qp, v0.qp, v0.pp);
        let mut cov = s;
        let q = integ.noise * integ.noise.transpose();
        for _ in 0..integ.steps_per_pulse {
            cov = integ.flow * cov * integ.flow.transpose() + q;
        }
        let free = crate::dynamics::free_propagator(&p, p.tau).unwrap().apply(&v0.to_vec3());
        let got = crate::linalg::Vec3::new(cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
        assert!((got - free).norm() / free.norm() < 1e-9, "{got} vs {free}");
    }

    #[test]
    fn thermal_state_is_stationary() {
        let p = SystemParams::default().with_theta(0.0).with_k(0.5);
        let v0 = p.thermal_state().unwrap();
        let opts = McOptions { trajectories: 4000, blocks: 40, seed: 11, ..McOptions::default() };
        let est = monte_carlo_moments(&p, &v0, 1, &opts).unwrap();
        assert!(est.max_z_score(&v0) < 3.0, "{est:?}");
    }

    #[test]
    fn kicked_moments_match_stroboscopic() {
        let p = SystemParams::default().with_k(4.0);
        let v0 = p.thermal_state().unwrap();
        let opts = McOptions { trajectories: 4000, blocks: 40, seed: 5, ..McOptions::default() };
        let est = monte_carlo_moments(&p, &v0, 4, &opts).unwrap();
        let exact = stroboscopic(&v0, &p, 4).unwrap();
        assert!(est.max_z_score(&exact) < 3.0, "{est:?} vs {exact:?}");
    }

    #[test]
    fn reproducible_and_schedule_independent() {
        let p = SystemParams::default().with_k(4.0);
        let v0 = p.thermal_state().unwrap();
        let opts = McOptions { trajectories: 200, blocks: 20, seed: 42, ..McOptions::default() };
        let a = monte_carlo_moments(&p, &v0, 2, &opts).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| monte_carlo_moments(&p, &v0, 2, &opts).unwrap());
        assert_eq!(a, b);
        let c = monte_carlo_moments(&p, &v0, 2, &McOptions { seed: 43, ..opts }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_options() {
        let p = SystemParams::default();
        let v0 = p.thermal_state().unwrap();
        let small = McOptions { trajectories: 10, ..McOptions::default() };
        assert!(monte_carlo_moments(&p, &v0, 1, &small).is_err());
        let coarse = McOptions { steps_per_period: 100, ..McOptions::default() };
        assert!(monte_carlo_moments(&p, &v0, 1, &coarse).is_err());
    }

    #[test]
    fn unstable_kicks_are_reported() {
        // undamped resonant kicks grow without bound, polynomially; a huge
        // theta makes that overflow quickly
        let p = SystemParams::new(0.5e6, 0.0, 0.0, 1e40, 3.0).unwrap();
        let v0 = MomentVector::new(0.5, 0.0, 0.5).unwrap();
        let opts = McOptions { trajectories: 100, blocks: 10, noise: NoiseModel::None, ..McOptions::default() };
        let err = monte_carlo_moments(&p, &v0, 20, &opts).unwrap_err();
        assert!(matches!(err, Error::Integrator(_)), "{err:?}");
    }

    #[test]
    fn jackknife_of_constant_samples() {
        let samples = vec![[2.0, -1.0, 3.0]; 500];
        let (m, e) = jackknife(&samples, 50);
        assert_eq!(m, [2.0, -1.0, 3.0]);
        assert!(e.iter().all(|&x| x < 1e-12));
    }

    #[test]
    fn jackknife_matches_standard_error_of_mean() {
        // blocks of one sample reduce to the textbook s / sqrt(n)
        let samples: Vec<[f64; 3]> = (0..200).map(|i| [i as f64, 0.0, 0.0]).collect();
        let (m, e) = jackknife(&samples, 200);
        let n = 200.0;
        let var = samples.iter().map(|s| (s[0] - m[0]).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((e[0] - (var / n).sqrt()).abs() < 1e-10);
    }
}
