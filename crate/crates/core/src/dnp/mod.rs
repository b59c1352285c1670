//! DNP spectra, polarization conversion, buildup dynamics and spin diffusion.

mod buildup;
mod diffusion;
mod polarization;

pub use buildup::{
    fit_buildup, relax_toward, simulate_buildup, BaselineMode, BuildupCurve, BuildupFit,
};
pub use diffusion::{diffusion_buildup, DiffusionConfig, DiffusionScheme, DiffusionSolver};
pub use polarization::{
    enhanced_polarization, recovery_correction_factor, recovery_time_for_factor,
    thermal_polarization, PolarizationConvention, BOLTZMANN, PLANCK,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::SpectrumGrid;

/// Signed DNP response against microwave frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnpSpectrum {
    pub mw_frequencies_ghz: Vec<f64>,
    pub signal: Vec<f64>,
}

impl DnpSpectrum {
    pub fn new(mw_frequencies_ghz: Vec<f64>, signal: Vec<f64>) -> Result<Self> {
        if mw_frequencies_ghz.len() != signal.len() {
            return Err(Error::Grid("frequency and signal lengths differ".into()));
        }
        if mw_frequencies_ghz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Grid("frequencies must be strictly ascending".into()));
        }
        Ok(DnpSpectrum {
            mw_frequencies_ghz,
            signal,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.signal.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Linear interpolation; zero outside the sampled range.
    pub fn interpolate(&self, f_ghz: f64) -> f64 {
        crate::spectra::interp_linear(&self.mw_frequencies_ghz, &self.signal, f_ghz)
    }

    /// Trapezoidal integral over frequency in MHz.
    pub fn integral_mhz(&self) -> f64 {
        self.mw_frequencies_ghz
            .windows(2)
            .zip(self.signal.windows(2))
            .map(|(f, y)| 0.5 * (y[0] + y[1]) * (f[1] - f[0]) * 1e3)
            .sum()
    }

    /// Largest `|S(f0 + δ) + S(f0 − δ)|` over grid points mirrored about the
    /// centre sample; requires an odd-length grid.
    pub fn antisymmetry_residual(&self) -> Option<f64> {
        let n = self.signal.len();
        if n % 2 == 0 {
            return None;
        }
        Some(
            (0..n / 2)
                .map(|i| (self.signal[i] + self.signal[n - 1 - i]).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// Maps an ODMR lineshape to a DNP response.
pub trait DnpKernel {
    fn apply(&self, odmr: &SpectrumGrid, nu_n_mhz: f64, scale: f64) -> Result<DnpSpectrum>;
}

/// Difference kernel `S(f) = scale·[L(f − ν_n) − L(f + ν_n)]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolidEffectKernel;

impl DnpKernel for SolidEffectKernel {
    fn apply(&self, odmr: &SpectrumGrid, nu_n_mhz: f64, scale: f64) -> Result<DnpSpectrum> {
        odmr.validate()?;
        if !(nu_n_mhz >= 0.0) || !nu_n_mhz.is_finite() {
            return Err(Error::Domain(format!("nuclear frequency {nu_n_mhz} MHz must be >= 0")));
        }
        let fs = &odmr.frequencies_ghz;
        if fs.len() < 2 {
            return Err(Error::Domain("ODMR grid has fewer than 2 points".into()));
        }
        let span_mhz = (fs[fs.len() - 1] - fs[0]) * 1e3;
        if span_mhz <= 2.0 * nu_n_mhz {
            return Err(Error::Domain(format!(
                "ODMR grid span {span_mhz:.3} MHz does not exceed 2·ν_n = {:.3} MHz",
                2.0 * nu_n_mhz
            )));
        }
        let shift = nu_n_mhz * 1e-3;
        let signal = fs
            .iter()
            .map(|&f| scale * (odmr.interpolate(f - shift) - odmr.interpolate(f + shift)))
            .collect();
        DnpSpectrum::new(fs.clone(), signal)
    }
}

/// DNP spectrum with the default difference kernel.
pub fn dnp_spectrum(odmr: &SpectrumGrid, nu_n_mhz: f64, scale: f64) -> Result<DnpSpectrum> {
    SolidEffectKernel.apply(odmr, nu_n_mhz, scale)
}

/// One sample row: enrichment, dynamics and enhancement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleParams {
    pub label: String,
    pub enrichment: f64,
    pub t_dnp_s: f64,
    pub t1n_s: f64,
    pub enhancement: f64,
    pub field_t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_mg: Option<f64>,
    /// Printed enhancement bounds when reported asymmetrically.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enhancement_bounds: Option<[f64; 2]>,
    /// Printed P_enh (%) and the number of decimals it was printed with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub printed_p_enh_percent: Option<PrintedValue>,
    /// Echo-train T2 pair (ms) of the hyperpolarized signal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_pair_ms: Option<[f64; 2]>,
    /// Thermal recovery-time correction factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction_factor: Option<f64>,
    /// Small-flip readout angle (degrees) used for T1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub small_flip_deg: Option<f64>,
    /// Recovery time of thermal measurements (s); defaults to T1n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery_time_s: Option<f64>,
}

/// A number as printed, with its decimal count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrintedValue {
    pub value: f64,
    pub decimals: u32,
}

impl PrintedValue {
    pub fn unit(&self) -> f64 {
        10f64.powi(-(self.decimals as i32))
    }

    /// `x` rounded to the printed precision.
    pub fn round(&self, x: f64) -> f64 {
        let s = 10f64.powi(self.decimals as i32);
        (x * s).round() / s
    }
}

impl SampleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_dnp_s > 0.0) || !(self.t1n_s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{}: time constants must be positive",
                self.label
            )));
        }
        if !(0.0..=1.0).contains(&self.enrichment) {
            return Err(Error::InvalidParameter(format!(
                "{}: enrichment outside [0, 1]",
                self.label
            )));
        }
        if !self.enhancement.is_finite() || !(self.field_t >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{}: enhancement must be finite and field non-negative",
                self.label
            )));
        }
        Ok(())
    }

    pub fn recovery_time(&self) -> f64 {
        self.recovery_time_s.unwrap_or(self.t1n_s)
    }
}
