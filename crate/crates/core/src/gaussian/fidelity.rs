use super::{Convention, GaussianSnapshot};
use crate::error::{Error, Result};
use crate::linalg::det2;

/// Root fidelity `Tr sqrt(sqrt(rho_a) rho_b sqrt(rho_a))` of two single-mode
/// Gaussian states.
///
/// The closed form in the QFI normalization evaluates the squared (Uhlmann)
/// fidelity; this returns its square root, the quantity that enters the
/// Bures distance.
pub fn fidelity(a: &GaussianSnapshot, b: &GaussianSnapshot) -> Result<f64> {
    let a = a.to_convention(Convention::Qfi);
    let b = b.to_convention(Convention::Qfi);
    let sum = a.cov.matrix() + b.cov.matrix();
    let big_delta = det2(&sum);
    if !(big_delta > 0.0) || !big_delta.is_finite() {
        return Err(Error::numeric(format!(
            "fidelity: singular covariance sum, det = {big_delta:.3e} (a = {:?}, b = {:?})",
            a.cov, b.cov
        )));
    }
    // (|S1| - 1)(|S2| - 1) is non-negative for physical states; clip rounding
    let small_delta = ((a.cov.determinant() - 1.0) * (b.cov.determinant() - 1.0)).max(0.0);

    let dx = [a.mean[0] - b.mean[0], a.mean[1] - b.mean[1]];
    let exponent = if dx == [0.0, 0.0] {
        0.0
    } else {
        let (s11, s12, s22) = (sum[(0, 0)], sum[(0, 1)], sum[(1, 1)]);
        let quad = (s22 * dx[0] * dx[0] - 2.0 * s12 * dx[0] * dx[1] + s11 * dx[1] * dx[1]) / big_delta;
        -0.5 * quad
    };

    // sqrt(D + d) - sqrt(d) = D / (sqrt(D + d) + sqrt(d)), free of cancellation
    let denom_inv = ((big_delta + small_delta).sqrt() + small_delta.sqrt()) / big_delta;
    let squared = 2.0 * exponent.exp() * denom_inv;
    if !squared.is_finite() {
        return Err(Error::numeric("fidelity: non-finite result"));
    }
    Ok(squared.sqrt().min(1.0))
}

/// `sqrt(2 (1 - f))` with the root fidelity `f`.
pub fn bures_distance(a: &GaussianSnapshot, b: &GaussianSnapshot) -> Result<f64> {
    let f = fidelity(a, b)?;
    Ok((2.0 * (1.0 - f)).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuresOptions {
    /// Largest accepted relative gap between the `h` and `h/2` estimates.
    pub threshold: f64,
    /// Scale below which the estimate counts as zero when forming the
    /// relative gap.
    pub abs_floor: f64,
}

impl Default for BuresOptions {
    fn default() -> Self {
        BuresOptions { threshold: 0.05, abs_floor: 1e-300 }
    }
}

/// QFI from the infinitesimal Bures distance, `D_B^2 = F dphi^2 / 4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuresEstimate {
    /// Richardson-extrapolated value `2 E(h/2) - E(h)`.
    pub value: f64,
    /// `E(h) = 8 (1 - f(phi0, phi0 + h)) / h^2`.
    pub coarse: f64,
    /// `E(h/2)`.
    pub fine: f64,
    pub discrepancy: f64,
}

pub fn qfi_bures_fd<F>(state_at: F, phi0: f64, h: f64, options: BuresOptions) -> Result<BuresEstimate>
where
    F: Fn(f64) -> Result<GaussianSnapshot>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::domain(format!("Bures step must be > 0, got {h}")));
    }
    let base = state_at(phi0)?;
    let estimate = |step: f64| -> Result<f64> {
        let f = fidelity(&base, &state_at(phi0 + step)?)?;
        Ok(8.0 * (1.0 - f) / (step * step))
    };
    let coarse = estimate(h)?;
    let fine = estimate(0.5 * h)?;
    let value = 2.0 * fine - coarse;
    let scale = value.abs().max(fine.abs()).max(options.abs_floor);
    let discrepancy = if coarse == fine { 0.0 } else { (coarse - fine).abs() / scale };
    if discrepancy > options.threshold {
        return Err(Error::Unreliable { what: "Bures QFI oracle", coarse, fine, discrepancy });
    }
    Ok(BuresEstimate { value, coarse, fine, discrepancy })
}

/// Symmetric variant: `E(h) = 8 (1 - f(phi0 - h/2, phi0 + h/2)) / h^2` is
/// even in `h`, so `(4 E(h/2) - E(h)) / 3` is accurate to `O(h^4)`. Preferred
/// for strongly squeezed families, where the step must stay large enough for
/// the infidelity to dominate rounding in the covariances.
pub fn qfi_bures_central<F>(state_at: F, phi0: f64, h: f64, options: BuresOptions) -> Result<BuresEstimate>
where
    F: Fn(f64) -> Result<GaussianSnapshot>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::domain(format!("Bures step must be > 0, got {h}")));
    }
    let estimate = |step: f64| -> Result<f64> {
        let f = fidelity(&state_at(phi0 - 0.5 * step)?, &state_at(phi0 + 0.5 * step)?)?;
        Ok(8.0 * (1.0 - f) / (step * step))
    };
    let coarse = estimate(h)?;
    let fine = estimate(0.5 * h)?;
    let value = (4.0 * fine - coarse) / 3.0;
    let scale = value.abs().max(fine.abs()).max(options.abs_floor);
    let discrepancy = if coarse == fine { 0.0 } else { (coarse - fine).abs() / scale };
    if discrepancy > options.threshold {
        return Err(Error::Unreliable { what: "Bures QFI oracle", coarse, fine, discrepancy });
    }
    Ok(BuresEstimate { value, coarse, fine, discrepancy })
}

/// Adjusts `h` so that `1 - f(phi0, phi0 + h)` lands near `target`, using
/// only fidelity evaluations (the infidelity grows like `h^2`).
pub fn bures_step_for<F>(state_at: F, phi0: f64, h_start: f64, target: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<GaussianSnapshot>,
{
    let base = state_at(phi0)?;
    let mut h = h_start;
    for _ in 0..12 {
        let d = 1.0 - fidelity(&base, &state_at(phi0 + h)?)?;
        if d <= 0.0 {
            return Ok(h);
        }
        let ratio = target / d;
        if (0.5..2.0).contains(&ratio) {
            break;
        }
        h *= ratio.sqrt().clamp(1e-3, 1e3);
    }
    Ok(h)
}
