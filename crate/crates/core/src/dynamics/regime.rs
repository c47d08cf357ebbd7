use serde::{Deserialize, Serialize};

use super::SystemParams;

/// Ratio below which `a << b` counts as satisfied. The paper parameter set
/// sits at exactly 0.1 on the pulse-duration condition.
pub const DEFAULT_REGIME_FACTOR: f64 = 0.1;
const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Relative slack on the boundary comparison.
const BOUNDARY_SLACK: f64 = 1e-12;

/// Validity conditions of the instantaneous-kick description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeCondition {
    /// `1/tau << kappa`: the cavity empties between pulses.
    CavityEmptiesBetweenPulses,
    /// `1/tau_p << kappa`: the intracavity field follows the pulse.
    CavityFollowsPulse,
    /// `tau_p << 1/omega_m`: the pulse is short against the mechanics.
    PulseShorterThanMechanics,
    /// `1/tau_p < c/(2L)`: the pulse spectrum stays within one free
    /// spectral range.
    PulseWithinFreeSpectralRange,
}

impl RegimeCondition {
    pub fn description(self) -> &'static str {
        match self {
            RegimeCondition::CavityEmptiesBetweenPulses => "1/tau << kappa",
            RegimeCondition::CavityFollowsPulse => "1/tau_p << kappa",
            RegimeCondition::PulseShorterThanMechanics => "tau_p << 1/omega_m",
            RegimeCondition::PulseWithinFreeSpectralRange => "1/tau_p < c/(2L)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeStatus {
    Satisfied,
    Violated,
    /// A required field (kappa, tau_p or cavity_length) is missing.
    Unevaluated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeCheck {
    pub condition: RegimeCondition,
    pub status: RegimeStatus,
    /// `lhs / rhs`; `None` when unevaluated.
    pub margin: Option<f64>,
}

/// Evaluates every regime condition. `<<` means a margin at most `factor`;
/// the strict `<` of the free-spectral-range condition means a margin below 1.
/// Purely diagnostic: nothing here blocks a simulation.
pub fn validate_regime(params: &SystemParams, factor: f64) -> Vec<RegimeCheck> {
    let check = |condition, ratio: Option<f64>, limit: f64, strict: bool| {
        let status = match ratio {
            None => RegimeStatus::Unevaluated,
            Some(m) if strict && m < limit => RegimeStatus::Satisfied,
            Some(m) if !strict && m <= limit * (1.0 + BOUNDARY_SLACK) => RegimeStatus::Satisfied,
            Some(_) => RegimeStatus::Violated,
        };
        RegimeCheck { condition, status, margin: ratio }
    };
    let kappa = params.kappa;
    let tau_p = params.tau_p;
    vec![
        check(
            RegimeCondition::CavityEmptiesBetweenPulses,
            kappa.map(|k| 1.0 / (params.tau * k)),
            factor,
            false,
        ),
        check(
            RegimeCondition::CavityFollowsPulse,
            kappa.zip(tau_p).map(|(k, tp)| 1.0 / (tp * k)),
            factor,
            false,
        ),
        check(
            RegimeCondition::PulseShorterThanMechanics,
            tau_p.map(|tp| tp * params.omega_m),
            factor,
            false,
        ),
        check(
            RegimeCondition::PulseWithinFreeSpectralRange,
            tau_p
                .zip(params.cavity_length)
                .map(|(tp, l)| (1.0 / tp) / (SPEED_OF_LIGHT / (2.0 * l))),
            1.0,
            true,
        ),
    ]
}
