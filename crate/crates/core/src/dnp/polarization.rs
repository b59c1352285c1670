use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant (J s), exact SI value.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant (J/K), exact SI value.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Spin-½ thermal polarization formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationConvention {
    /// `tanh(h ν / 2kT)`
    TanhHalf,
    /// `h ν / kT`; reproduces the printed P_enh column.
    #[default]
    HighTemperatureNoHalf,
}

/// Thermal nuclear polarization at field `b_t` and temperature `temperature_k`
/// for a nucleus with gyromagnetic ratio `gamma_n_mhz_per_t`.
pub fn thermal_polarization(
    b_t: f64,
    temperature_k: f64,
    gamma_n_mhz_per_t: f64,
    convention: PolarizationConvention,
) -> Result<f64> {
    if !(b_t >= 0.0) || !(temperature_k > 0.0) {
        return Err(Error::Domain(format!(
            "need B >= 0 and T > 0 (got B = {b_t} T, T = {temperature_k} K)"
        )));
    }
    let x = PLANCK * gamma_n_mhz_per_t * 1e6 * b_t / (BOLTZMANN * temperature_k);
    Ok(match convention {
        PolarizationConvention::TanhHalf => (0.5 * x).tanh(),
        PolarizationConvention::HighTemperatureNoHalf => x.min(1.0 - f64::EPSILON),
    })
}

pub fn enhanced_polarization(enhancement: f64, thermal: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&thermal) {
        return Err(Error::Domain(format!("thermal polarization {thermal} outside [0, 1)")));
    }
    Ok(enhancement * thermal)
}

/// `1 / (1 − exp(−t_rec / T1))`: amplitude lost by recovering for only `t_rec`.
pub fn recovery_correction_factor(t_rec_s: f64, t1_s: f64) -> Result<f64> {
    if !(t_rec_s > 0.0) || !(t1_s > 0.0) {
        return Err(Error::Domain("recovery time and T1 must be positive".into()));
    }
    Ok(1.0 / -(-t_rec_s / t1_s).exp_m1())
}

/// Inverse of [`recovery_correction_factor`] in `t_rec`.
pub fn recovery_time_for_factor(factor: f64, t1_s: f64) -> Result<f64> {
    if !(factor > 1.0) || !(t1_s > 0.0) {
        return Err(Error::Domain("factor must exceed 1 and T1 be positive".into()));
    }
    Ok(-t1_s * (-1.0 / factor).ln_1p())
}
