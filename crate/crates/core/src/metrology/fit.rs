use serde::{Deserialize, Serialize};

use super::QfiTrajectory;
use crate::error::{Error, Result};

const MIN_FIT_POINTS: usize = 5;
const LOW_CONFIDENCE_R2: f64 = 0.9;
/// Fraction of the maximum that ends the automatic rise window.
const RISE_FRACTION: f64 = 0.9;
const SATURATION_TOLERANCE: f64 = 1e-3;

/// Rows entering the power-law fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WindowPolicy {
    /// From the first row up to the first `n` with `F >= 0.9 max F`.
    #[default]
    Auto,
    /// Rows with `n_lo <= n <= n_hi`.
    Explicit { n_lo: u64, n_hi: u64 },
}

/// Least-squares fit of `ln F = ln prefactor + alpha ln n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    /// `(n_lo, n_hi)` actually used.
    pub window: (u64, u64),
    pub points: usize,
    /// `r_squared < 0.9`.
    pub low_confidence: bool,
}

pub fn fit_scaling_exponent(traj: &QfiTrajectory, policy: WindowPolicy) -> Result<FitResult> {
    let rows = &traj.rows;
    if rows.is_empty() {
        return Err(Error::Fit("empty trajectory".into()));
    }
    let (n_lo, n_hi) = match policy {
        WindowPolicy::Auto => {
            let threshold = RISE_FRACTION * traj.max_f();
            let end = rows.iter().find(|r| r.f >= threshold).expect("max is attained");
            (rows[0].n, end.n)
        }
        WindowPolicy::Explicit { n_lo, n_hi } => {
            if n_lo > n_hi {
                return Err(Error::Fit(format!("empty window {n_lo}:{n_hi}")));
            }
            (n_lo, n_hi)
        }
    };
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.n >= n_lo && r.n <= n_hi && r.n > 0 && r.f > 0.0)
        .map(|r| ((r.n as f64).ln(), r.f.ln()))
        .collect();
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "{} usable points in window {n_lo}:{n_hi}, need {MIN_FIT_POINTS}",
            points.len()
        )));
    }

    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let alpha = sxy / sxx;
    let intercept = my - alpha * mx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - alpha * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(FitResult {
        alpha,
        prefactor: intercept.exp(),
        r_squared,
        window: (n_lo, n_hi),
        points: points.len(),
        low_confidence: r_squared < LOW_CONFIDENCE_R2,
    })
}

/// First pulse number where the QFI has levelled off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationPoint {
    pub n: u64,
    pub f: f64,
}

/// Smallest `n` with `|F(n) - F(2n)| / F(2n) < 1e-3`, if the trajectory
/// reaches `2n`.
pub fn saturation(traj: &QfiTrajectory) -> Option<SaturationPoint> {
    traj.rows.iter().find_map(|r| {
        let later = traj.at(2 * r.n)?;
        let settled = later.f > 0.0 && ((r.f - later.f) / later.f).abs() < SATURATION_TOLERANCE;
        settled.then_some(SaturationPoint { n: r.n, f: later.f })
    })
}
