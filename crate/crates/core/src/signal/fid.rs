use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{t_quantile, Estimate};
use crate::seed::rng_from_seed;

/// Uniformly sampled complex time-domain record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidRecord {
    pub samples: Vec<Complex64>,
    pub dwell_s: f64,
    #[serde(default)]
    pub start_time_s: f64,
}

impl FidRecord {
    pub fn new(samples: Vec<Complex64>, dwell_s: f64, start_time_s: f64) -> Result<Self> {
        let r = FidRecord {
            samples,
            dwell_s,
            start_time_s,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dwell_s > 0.0) || !self.start_time_s.is_finite() {
            return Err(Error::Domain("dwell must be positive and start time finite".into()));
        }
        if self.samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("non-finite sample".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_time_s + i as f64 * self.dwell_s
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn real(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.re).collect()
    }

    pub fn same_grid(&self, other: &FidRecord) -> bool {
        self.len() == other.len()
            && (self.dwell_s - other.dwell_s).abs() <= 1e-12 * self.dwell_s
            && (self.start_time_s - other.start_time_s).abs() <= 1e-12 * self.dwell_s.max(1.0)
    }
}

/// Phenomenological transverse decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayModel {
    None,
    Exponential { t2_s: f64 },
    Gaussian { t2_s: f64 },
    /// `f·e^(−t/T_a) + (1 − f)·e^(−t/T_b)`
    Biexponential { fraction: f64, t2_a_s: f64, t2_b_s: f64 },
}

impl DecayModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DecayModel::None => true,
            DecayModel::Exponential { t2_s } | DecayModel::Gaussian { t2_s } => t2_s > 0.0,
            DecayModel::Biexponential { fraction, t2_a_s, t2_b_s } => {
                (0.0..=1.0).contains(&fraction) && t2_a_s > 0.0 && t2_b_s > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid decay model {self:?}")))
        }
    }

    pub fn envelope(&self, t: f64) -> f64 {
        match *self {
            DecayModel::None => 1.0,
            DecayModel::Exponential { t2_s } => (-t / t2_s).exp(),
            DecayModel::Gaussian { t2_s } => (-(t / t2_s).powi(2)).exp(),
            DecayModel::Biexponential { fraction, t2_a_s, t2_b_s } => {
                fraction * (-t / t2_a_s).exp() + (1.0 - fraction) * (-t / t2_b_s).exp()
            }
        }
    }
}

/// Adds i.i.d. Gaussian noise of standard deviation `sigma` to the real and
/// imaginary parts of every sample.
pub(crate) fn add_complex_noise(samples: &mut [Complex64], sigma: f64, seed: u64) -> Result<()> {
    if !(sigma >= 0.0) {
        return Err(Error::Domain("noise sigma must be non-negative".into()));
    }
    if sigma == 0.0 {
        return Ok(());
    }
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    for z in samples {
        z.re += normal.sample(&mut rng);
        z.im += normal.sample(&mut rng);
    }
    Ok(())
}

/// `s(t) = A·d(t)·exp(2πi·Δf·t)` plus complex Gaussian noise.
pub fn synthesize_fid(
    amplitude: f64,
    decay: DecayModel,
    offset_hz: f64,
    noise_sigma: f64,
    seed: u64,
    n_points: usize,
    dwell_s: f64,
) -> Result<FidRecord> {
    decay.validate()?;
    if n_points == 0 || !(dwell_s > 0.0) || !amplitude.is_finite() || !offset_hz.is_finite() {
        return Err(Error::Domain(
            "need n_points >= 1, positive dwell, finite amplitude and offset".into(),
        ));
    }
    let mut samples: Vec<Complex64> = (0..n_points)
        .map(|i| {
            let t = i as f64 * dwell_s;
            Complex64::from_polar(amplitude * decay.envelope(t), std::f64::consts::TAU * offset_hz * t)
        })
        .collect();
    add_complex_noise(&mut samples, noise_sigma, seed)?;
    FidRecord::new(samples, dwell_s, 0.0)
}

/// Centered moving average with a window of `window_s` over a series sampled
/// every `period_s`. Windows are truncated at the edges.
pub fn moving_average(values: &[f64], period_s: f64, window_s: f64) -> Result<Vec<f64>> {
    if !(period_s > 0.0) || !(window_s >= period_s * (1.0 - 1e-9)) {
        return Err(Error::Domain(format!(
            "window {window_s} s is shorter than one sample period {period_s} s"
        )));
    }
    let w = ((window_s / period_s).round() as usize).max(1);
    let back = (w - 1) / 2;
    let fwd = w / 2;
    let n = values.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + fwd).min(n - 1);
            // Offset from the first sample keeps constant runs exact.
            let base = values[lo];
            base + values[lo..=hi].iter().map(|v| v - base).sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleChannel {
    /// Least squares on the real parts only.
    #[default]
    Real,
    /// Real part of the complex projection; both quadratures carry noise.
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleFit {
    pub scale: Estimate,
    pub residual_norm: f64,
}

/// Least-squares scalar `s` minimizing `|target − s·model|²`.
pub fn fit_scaling_factor(target: &FidRecord, model: &FidRecord, channel: ScaleChannel) -> Result<ScaleFit> {
    if !target.same_grid(model) {
        return Err(Error::Domain("target and model are on different time grids".into()));
    }
    let (num, den, n_obs) = match channel {
        ScaleChannel::Real => (
            target.samples.iter().zip(&model.samples).map(|(t, m)| t.re * m.re).sum::<f64>(),
            model.samples.iter().map(|m| m.re * m.re).sum::<f64>(),
            target.len(),
        ),
        ScaleChannel::Complex => (
            target.samples.iter().zip(&model.samples).map(|(t, m)| (m.conj() * t).re).sum::<f64>(),
            model.samples.iter().map(|m| m.norm_sqr()).sum::<f64>(),
            2 * target.len(),
        ),
    };
    if !(den > 0.0) {
        return Err(Error::Domain("model has zero norm in the fitted channel".into()));
    }
    let s = num / den;
    let rss: f64 = match channel {
        ScaleChannel::Real => target
            .samples
            .iter()
            .zip(&model.samples)
            .map(|(t, m)| (t.re - s * m.re).powi(2))
            .sum(),
        ScaleChannel::Complex => target
            .samples
            .iter()
            .zip(&model.samples)
            .map(|(t, m)| (t - m * s).norm_sqr())
            .sum(),
    };
    let dof = n_obs.saturating_sub(1).max(1);
    let se = (rss / dof as f64 / den).sqrt();
    Ok(ScaleFit {
        scale: Estimate::symmetric(s, se, t_quantile(dof)),
        residual_norm: rss.sqrt(),
    })
}
