use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fid::add_complex_noise;
use crate::error::{Error, Result};

/// Receiver phase cycle of the solid-echo train (degrees).
pub const DEFAULT_PHASE_CYCLE: [f64; 4] = [180.0, 0.0, 0.0, 180.0];

/// `n` echoes of `m` complex points each, acquired `tau_s` apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoTrain {
    pub echoes: Vec<Vec<Complex64>>,
    pub tau_s: f64,
    pub phase_cycle_deg: Vec<f64>,
    pub dwell_s: f64,
}

impl EchoTrain {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_s > 0.0) || !(self.dwell_s > 0.0) {
            return Err(Error::Domain("tau and dwell must be positive".into()));
        }
        if self.phase_cycle_deg.is_empty() {
            return Err(Error::Domain("phase cycle is empty".into()));
        }
        if self.echoes.len() % self.phase_cycle_deg.len() != 0 {
            return Err(Error::Domain(format!(
                "{} echoes is not a whole number of {}-step phase cycles",
                self.echoes.len(),
                self.phase_cycle_deg.len()
            )));
        }
        let m = self.points_per_echo();
        if m == 0 || self.echoes.iter().any(|e| e.len() != m) {
            return Err(Error::Domain("echoes must be non-empty and of equal length".into()));
        }
        Ok(())
    }

    pub fn n_echoes(&self) -> usize {
        self.echoes.len()
    }

    pub fn points_per_echo(&self) -> usize {
        self.echoes.first().map_or(0, Vec::len)
    }

    fn phase(&self, k: usize) -> f64 {
        self.phase_cycle_deg[k % self.phase_cycle_deg.len()].to_radians()
    }

    /// Undoes the receiver phase of every echo.
    pub fn compensated(&self) -> EchoTrain {
        self.with_phases(-1.0)
    }

    /// Applies the phase cycle to an uncycled train.
    pub fn cycled(&self) -> EchoTrain {
        self.with_phases(1.0)
    }

    fn with_phases(&self, sign: f64) -> EchoTrain {
        let echoes = self
            .echoes
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let r = Complex64::from_polar(1.0, sign * self.phase(k));
                e.iter().map(|z| z * r).collect()
            })
            .collect();
        EchoTrain {
            echoes,
            ..self.clone()
        }
    }

    /// Per-echo amplitude: real part of the mean of the first quarter of
    /// each phase-compensated echo.
    pub fn envelope(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let q = (self.points_per_echo() / 4).max(1);
        Ok(self
            .echoes
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let r = Complex64::from_polar(1.0, -self.phase(k));
                (e[..q].iter().sum::<Complex64>() * r).re / q as f64
            })
            .collect())
    }

    pub fn times(&self) -> Vec<f64> {
        echo_times(self.tau_s, self.n_echoes())
    }
}

pub fn echo_times(tau_s: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * tau_s).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoParams {
    pub a1: f64,
    pub t2_1_s: f64,
    pub a2: f64,
    pub t2_2_s: f64,
    pub tau_s: f64,
    pub n_echoes: usize,
    pub points_per_echo: usize,
    pub dwell_s: f64,
    pub noise_sigma: f64,
    pub phase_cycle_deg: Vec<f64>,
}

impl Default for EchoParams {
    fn default() -> Self {
        EchoParams {
            a1: 0.5,
            t2_1_s: 19.48e-3,
            a2: 0.5,
            t2_2_s: 364.47e-3,
            tau_s: 40e-6,
            n_echoes: 500,
            points_per_echo: 32,
            dwell_s: 0.5e-6,
            noise_sigma: 0.0,
            phase_cycle_deg: DEFAULT_PHASE_CYCLE.to_vec(),
        }
    }
}

impl EchoParams {
    pub fn envelope_at(&self, t: f64) -> f64 {
        self.a1 * (-t / self.t2_1_s).exp() + self.a2 * (-t / self.t2_2_s).exp()
    }
}

/// Flat-top echoes: every point of echo k carries the biexponential envelope
/// at `k·tau` rotated by the receiver phase, plus complex Gaussian noise.
pub fn synthesize_echo_train(params: &EchoParams, seed: u64) -> Result<EchoTrain> {
    if !(params.t2_1_s > 0.0 && params.t2_2_s > 0.0) || !(params.a1 >= 0.0 && params.a2 >= 0.0) {
        return Err(Error::Domain("echo amplitudes must be >= 0 and T2 values positive".into()));
    }
    if params.n_echoes == 0 || params.points_per_echo == 0 {
        return Err(Error::Domain("need at least one echo and one point per echo".into()));
    }
    let m = params.points_per_echo;
    let mut flat: Vec<Complex64> = Vec::with_capacity(params.n_echoes * m);
    let cycle = &params.phase_cycle_deg;
    for k in 0..params.n_echoes {
        let a = params.envelope_at(k as f64 * params.tau_s);
        let phase = cycle.get(k % cycle.len().max(1)).copied().unwrap_or(0.0).to_radians();
        flat.extend(std::iter::repeat_n(Complex64::from_polar(a, phase), m));
    }
    add_complex_noise(&mut flat, params.noise_sigma, seed)?;
    let train = EchoTrain {
        echoes: flat.chunks(m).map(<[Complex64]>::to_vec).collect(),
        tau_s: params.tau_s,
        phase_cycle_deg: cycle.clone(),
        dwell_s: params.dwell_s,
    };
    train.validate()?;
    Ok(train)
}
