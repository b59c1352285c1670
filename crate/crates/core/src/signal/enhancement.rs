use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::bootstrap::BootstrapResult;
use crate::error::{Error, Result};
use crate::fit::CONFIDENCE;

/// `Auto` reports symmetric bounds while the thermal 95 % half-width stays
/// within this fraction of the thermal mean.
pub const RELATIVE_WIDTH_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMode {
    #[default]
    Auto,
    /// First-order propagation of the thermal σ.
    Symmetric,
    /// Thermal mean ± z·σ pushed through the reciprocal.
    BoundTransform,
    /// Bootstrap percentile interval pushed through the reciprocal.
    Percentile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhancementReport {
    pub enhancement: f64,
    pub lower: f64,
    pub upper: f64,
    pub symmetric: bool,
    /// Mode actually used (never `Auto`).
    pub mode: CiMode,
    pub thermal_mean: f64,
    pub thermal_sigma: f64,
    pub thermal_low: f64,
    pub thermal_high: f64,
    pub relative_half_width: f64,
    pub correction_factor: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn z_value() -> f64 {
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 + 0.5 * CONFIDENCE)
}

/// Reciprocal image of `[lo, hi]` under `x ↦ k / x` for an interval that
/// excludes zero, or that reaches it (returning an infinite bound).
fn reciprocal_bounds(k: f64, lo: f64, hi: f64) -> (f64, f64) {
    let a = if lo == 0.0 { f64::INFINITY * k.signum() } else { k / lo };
    let b = if hi == 0.0 { f64::INFINITY * k.signum() } else { k / hi };
    (a.min(b), a.max(b))
}

/// `ε = hp / (thermal · correction)` with an interval chosen by `mode`.
pub fn enhancement_with_ci(
    hp_amplitude: f64,
    thermal: &BootstrapResult,
    correction_factor: f64,
    mode: CiMode,
) -> Result<EnhancementReport> {
    if !(correction_factor > 0.0) || !hp_amplitude.is_finite() {
        return Err(Error::Domain("correction factor must be positive and amplitude finite".into()));
    }
    let m = thermal.mean;
    if m == 0.0 || !m.is_finite() {
        return Err(Error::Unbounded("thermal amplitude is zero".into()));
    }
    let z = z_value();
    let (t_lo, t_hi) = (m - z * thermal.sigma, m + z * thermal.sigma);
    let rel = z * thermal.sigma / m.abs();
    let contains_zero = t_lo <= 0.0 && t_hi >= 0.0;
    let resolved = match mode {
        CiMode::Auto if rel <= RELATIVE_WIDTH_THRESHOLD => CiMode::Symmetric,
        CiMode::Auto => CiMode::BoundTransform,
        other => other,
    };
    let asymmetric_requested = matches!(mode, CiMode::BoundTransform | CiMode::Percentile);
    if contains_zero && !asymmetric_requested {
        return Err(Error::Unbounded(format!(
            "thermal 95 % interval [{t_lo:.4e}, {t_hi:.4e}] contains zero; request an asymmetric mode"
        )));
    }

    let k = hp_amplitude / correction_factor;
    let eps = k / m;
    let mut warnings = thermal.warnings.clone();
    let (lower, upper) = match resolved {
        CiMode::Symmetric => {
            let s = eps.abs() * thermal.sigma / m.abs();
            (eps - z * s, eps + z * s)
        }
        CiMode::BoundTransform | CiMode::Percentile => {
            let (lo, hi) = if resolved == CiMode::Percentile {
                (thermal.ci_low, thermal.ci_high)
            } else {
                (t_lo, t_hi)
            };
            if lo <= 0.0 && hi >= 0.0 {
                warnings.push("thermal interval reaches zero; enhancement unbounded on one side".into());
                if m > 0.0 {
                    reciprocal_bounds(k, 0.0, hi)
                } else {
                    reciprocal_bounds(k, lo, 0.0)
                }
            } else {
                reciprocal_bounds(k, lo, hi)
            }
        }
        CiMode::Auto => unreachable!("resolved above"),
    };
    Ok(EnhancementReport {
        enhancement: eps,
        lower: lower.min(eps),
        upper: upper.max(eps),
        symmetric: resolved == CiMode::Symmetric,
        mode: resolved,
        thermal_mean: m,
        thermal_sigma: thermal.sigma,
        thermal_low: t_lo,
        thermal_high: t_hi,
        relative_half_width: rel,
        correction_factor,
        warnings,
    })
}
