use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_scaling_exponent, qfi_vs_pulses, saturation, SensitivityMethod, WindowPolicy};
use crate::dynamics::SystemParams;
use crate::error::{Error, Result};

/// One sweep dimension with its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SweepAxis {
    K(Vec<f64>),
    Theta(Vec<f64>),
    GammaM(Vec<f64>),
    NTh(Vec<f64>),
    NPulses(Vec<u64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::K(_) => "k",
            SweepAxis::Theta(_) => "theta",
            SweepAxis::GammaM(_) => "gamma_m",
            SweepAxis::NTh(_) => "n_th",
            SweepAxis::NPulses(_) => "n_pulses",
        }
    }

    fn len(&self) -> usize {
        match self {
            SweepAxis::K(v) | SweepAxis::Theta(v) | SweepAxis::GammaM(v) | SweepAxis::NTh(v) => v.len(),
            SweepAxis::NPulses(v) => v.len(),
        }
    }

    fn apply(&self, i: usize, params: &mut SystemParams, n_pulses: &mut u64) {
        match self {
            SweepAxis::K(v) => *params = params.with_k(v[i]),
            SweepAxis::Theta(v) => params.theta = v[i],
            SweepAxis::GammaM(v) => params.gamma_m = v[i],
            SweepAxis::NTh(v) => params.n_th = v[i],
            SweepAxis::NPulses(v) => *n_pulses = v[i],
        }
    }

    fn value(&self, i: usize) -> f64 {
        match self {
            SweepAxis::K(v) | SweepAxis::Theta(v) | SweepAxis::GammaM(v) | SweepAxis::NTh(v) => v[i],
            SweepAxis::NPulses(v) => v[i] as f64,
        }
    }
}

/// Per-point outputs, all taken from the QFI trajectory up to `n_pulses`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantity {
    /// `F` at `n = n_pulses`.
    Qfi,
    /// Largest `F` over `1..=n_pulses`.
    MaxQfi,
    /// Saturated `F` (NaN-free: an error when not yet saturated).
    SaturatedQfi,
    SqueezingR,
    SqueezingPhi,
    Purity,
    /// Power-law exponent of the rise of `F`.
    Alpha,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Qfi => "F",
            Quantity::MaxQfi => "F_max",
            Quantity::SaturatedQfi => "F_sat",
            Quantity::SqueezingR => "r",
            Quantity::SqueezingPhi => "phi_rad",
            Quantity::Purity => "purity",
            Quantity::Alpha => "alpha",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Quantity::Qfi,
            Quantity::MaxQfi,
            Quantity::SaturatedQfi,
            Quantity::SqueezingR,
            Quantity::SqueezingPhi,
            Quantity::Purity,
            Quantity::Alpha,
        ]
        .into_iter()
        .find(|q| q.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Cartesian product; the first axis varies slowest.
    pub axes: Vec<SweepAxis>,
    pub quantities: Vec<Quantity>,
    /// Pulse count unless an `NPulses` axis overrides it.
    pub n_pulses: u64,
    pub method: SensitivityMethod,
    pub window: WindowPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityValue {
    pub quantity: Quantity,
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    /// `(axis name, value)` for each axis.
    pub coordinates: Vec<(String, f64)>,
    pub params: SystemParams,
    pub n_pulses: u64,
    pub values: Vec<QuantityValue>,
}

fn evaluate(params: &SystemParams, n_pulses: u64, spec: &SweepSpec) -> Vec<QuantityValue> {
    let traj = qfi_vs_pulses(params, n_pulses as usize, spec.method);
    spec.quantities
        .iter()
        .map(|&quantity| {
            let value: Result<f64> = traj.as_ref().map_err(Clone::clone).and_then(|t| {
                let last = t.rows.last().expect("n_pulses >= 1");
                match quantity {
                    Quantity::Qfi => Ok(last.f),
                    Quantity::MaxQfi => Ok(t.max_f()),
                    Quantity::SaturatedQfi => saturation(t)
                        .map(|s| s.f)
                        .ok_or_else(|| Error::Fit("QFI not saturated within the run".into())),
                    Quantity::SqueezingR => Ok(last.r),
                    Quantity::SqueezingPhi => last.phi.ok_or_else(|| Error::domain("squeezing angle undefined")),
                    Quantity::Purity => Ok(last.purity),
                    Quantity::Alpha => fit_scaling_exponent(t, spec.window).map(|f| f.alpha),
                }
            });
            match value {
                Ok(v) => QuantityValue { quantity, value: Some(v), error: None },
                Err(e) => QuantityValue { quantity, value: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

/// Evaluates every grid point (in parallel) and returns them in grid order.
/// Failures are recorded per quantity and never abort the sweep.
pub fn sweep(base: &SystemParams, spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    if spec.axes.iter().any(|a| a.len() == 0) {
        return Err(Error::domain("sweep axes must be non-empty"));
    }
    if spec.quantities.is_empty() {
        return Err(Error::domain("no sweep quantities requested"));
    }
    let total: usize = spec.axes.iter().map(SweepAxis::len).product();
    let points: Vec<(usize, Vec<usize>)> = (0..total)
        .map(|index| {
            let mut rem = index;
            let mut idx = vec![0; spec.axes.len()];
            for (a, axis) in spec.axes.iter().enumerate().rev() {
                idx[a] = rem % axis.len();
                rem /= axis.len();
            }
            (index, idx)
        })
        .collect();

    Ok(points
        .into_par_iter()
        .map(|(index, idx)| {
            let mut params = *base;
            let mut n_pulses = spec.n_pulses;
            for (axis, &i) in spec.axes.iter().zip(&idx) {
                axis.apply(i, &mut params, &mut n_pulses);
            }
            let coordinates = spec.axes.iter().zip(&idx).map(|(a, &i)| (a.name().to_string(), a.value(i))).collect();
            let values = if n_pulses == 0 {
                spec.quantities
                    .iter()
                    .map(|&quantity| QuantityValue { quantity, value: None, error: Some("n_pulses must be >= 1".into()) })
                    .collect()
            } else {
                evaluate(&params, n_pulses, spec)
            };
            SweepPoint { index, coordinates, params, n_pulses, values }
        })
        .collect())
}
