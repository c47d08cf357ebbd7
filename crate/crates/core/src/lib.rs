//! Gaussian-state moment dynamics of a mechanical resonator driven by a
//! train of short optical pulses, and the quantum Fisher information (QFI)
//! of its state with respect to the mechanical frequency.
//!
//! The crate is organised bottom-up:
//!
//! - [`gaussian`]: covariance conventions, purity, fidelity, Bures distance,
//!   the closed-form single-mode QFI and its finite-difference oracle,
//!   squeezing decomposition and Wigner functions.
//! - [`dynamics`]: drift and kick maps for the second moments, free
//!   propagation by matrix exponential, stroboscopic evolution, steady states
//!   and a Monte Carlo Langevin oracle.
//! - [`metrology`]: frequency sensitivity, QFI and squeezing trajectories
//!   versus pulse number, mass scaling, power-law fits and parameter sweeps.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod metrology;

pub use dynamics::{
    monte_carlo::{monte_carlo_moments, McEstimate, McOptions, NoiseModel},
    steady_moments, step, stroboscopic, validate_regime, RegimeCheck, RegimeCondition, RegimeStatus,
    SteadyState, SystemParams,
};
pub use error::{Error, Result};
pub use gaussian::{
    Convention, CovarianceMatrix, GaussianSnapshot, MomentVector, SqueezingDecomposition,
};
pub use metrology::{
    fit_scaling_exponent, mass_qfi, qfi_vs_pulses, squeezing_trajectory, sweep, FitResult, QfiRow,
    QfiTrajectory, Sampling, SensitivityMethod, WindowPolicy,
};
