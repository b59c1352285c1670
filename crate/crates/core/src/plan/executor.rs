use serde::{Deserialize, Serialize};

use super::timeline::{Payload, Timeline};
use crate::dnp::{relax_toward, DnpSpectrum, SampleParams};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::signal::{synthesize_fid, DecayModel, FidRecord};

/// Forward-model settings shared by every acquisition of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    /// Pump profile; the buildup asymptote at `f` is
    /// `peak_polarization · S(f) / max|S|`.
    pub pump_profile: DnpSpectrum,
    pub peak_polarization: f64,
    /// Relaxation target when not pumping.
    pub thermal_polarization: f64,
    pub fid_decay: DecayModel,
    pub noise_sigma: f64,
    /// Signal amplitude per unit transverse polarization.
    pub signal_scale: f64,
}

impl PhysicsConfig {
    /// Asymptote `ε·P_thermal` at the strongest point of the DNP spectrum.
    pub fn for_sample(sample: &SampleParams, pump_profile: DnpSpectrum, thermal_polarization: f64) -> Self {
        PhysicsConfig {
            pump_profile,
            peak_polarization: sample.enhancement * thermal_polarization,
            thermal_polarization,
            fid_decay: DecayModel::Exponential { t2_s: 1e-3 },
            noise_sigma: 0.0,
            signal_scale: 1.0,
        }
    }

    pub fn pump_target(&self, f_ghz: f64) -> f64 {
        let m = self.pump_profile.max_abs();
        if m == 0.0 {
            0.0
        } else {
            self.peak_polarization * self.pump_profile.interpolate(f_ghz) / m
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionState {
    /// Longitudinal nuclear polarization.
    pub polarization: f64,
    pub mw_ghz: Option<f64>,
    pub laser_on: bool,
    pub clock_s: f64,
    /// Transverse signal `(polarization·sin θ, phase)` left by the last pulse.
    pub transverse: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionResult {
    pub index: usize,
    pub t_start_s: f64,
    pub mw_ghz: Option<f64>,
    /// Signed signal amplitude (before noise).
    pub amplitude: f64,
    pub fid: FidRecord,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Execution {
    pub acquisitions: Vec<AcquisitionResult>,
    pub final_state: ExecutionState,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn evolve(state: &mut ExecutionState, to: f64, sample: &SampleParams, physics: &PhysicsConfig) {
    let dt = to - state.clock_s;
    if dt > 0.0 {
        state.polarization = match (state.laser_on, state.mw_ghz) {
            (true, Some(f)) => relax_toward(state.polarization, physics.pump_target(f), dt, sample.t_dnp_s),
            _ => relax_toward(state.polarization, physics.thermal_polarization, dt, sample.t1n_s),
        };
        state.clock_s = to;
    }
}

/// Runs a compiled timeline. Starts from thermal equilibrium with laser and
/// microwave off. Saturation pulses zero the polarization; other pulses keep
/// `P·cos θ` longitudinally and leave `P·sin θ` for the next acquisition.
pub fn execute_plan(
    timeline: &Timeline,
    sample: &SampleParams,
    physics: &PhysicsConfig,
    seed: u64,
) -> Result<Execution> {
    sample.validate()?;
    if !(physics.noise_sigma >= 0.0) {
        return Err(Error::Config("noise sigma must be non-negative".into()));
    }
    let mut state = ExecutionState {
        polarization: physics.thermal_polarization,
        mw_ghz: None,
        laser_on: false,
        clock_s: 0.0,
        transverse: None,
    };
    let mut acquisitions = Vec::new();
    let mut warnings = Vec::new();
    for e in &timeline.events {
        evolve(&mut state, e.t_start_s, sample, physics);
        match &e.payload {
            Payload::LaserOn => state.laser_on = true,
            Payload::LaserOff => state.laser_on = false,
            Payload::MwOn { frequency_ghz } => state.mw_ghz = Some(*frequency_ghz),
            Payload::MwOff => state.mw_ghz = None,
            Payload::Wait => {}
            Payload::Pulse { saturation: true, .. } => {
                state.polarization = 0.0;
                state.transverse = None;
            }
            Payload::Pulse { angle_deg, phase, .. } => {
                let (s, c) = angle_deg.to_radians().sin_cos();
                state.transverse = Some((state.polarization * s, phase.radians()));
                state.polarization *= c;
            }
            Payload::Acquire { n_points, dwell_s, index } => {
                let mut w = Vec::new();
                let (amp, phase) = state.transverse.take().unwrap_or_else(|| {
                    w.push(format!("acquisition {index} has no preceding excitation pulse; signal is zero"));
                    (0.0, 0.0)
                });
                let amplitude = amp * physics.signal_scale;
                // Signed amplitude: a negative polarization flips the phase by π.
                let (mag, ph) = if amplitude < 0.0 {
                    (-amplitude, phase + std::f64::consts::PI)
                } else {
                    (amplitude, phase)
                };
                let mut fid = synthesize_fid(
                    mag,
                    physics.fid_decay,
                    0.0,
                    physics.noise_sigma,
                    derive_seed(seed, "acquire", *index as u64),
                    *n_points as usize,
                    *dwell_s,
                )?;
                let rot = num_complex::Complex64::from_polar(1.0, ph);
                for z in &mut fid.samples {
                    // Noise is isotropic, so rotating the whole record keeps its statistics.
                    *z *= rot;
                }
                fid.start_time_s = e.t_start_s;
                warnings.extend(w.iter().cloned());
                acquisitions.push(AcquisitionResult {
                    index: *index,
                    t_start_s: e.t_start_s,
                    mw_ghz: state.mw_ghz,
                    amplitude,
                    fid,
                    warnings: w,
                });
            }
        }
    }
    evolve(&mut state, timeline.duration_s, sample, physics);
    if acquisitions.is_empty() {
        warnings.push("plan contains no acquisitions".into());
    }
    Ok(Execution {
        acquisitions,
        final_state: state,
        warnings,
    })
}

/// Runs the timeline once per microwave frequency, replacing every `mw on`
/// frequency. Point `i` uses the seed derived from `(seed, "sweep", i)`.
pub fn sweep_frequencies(
    timeline: &Timeline,
    sample: &SampleParams,
    physics: &PhysicsConfig,
    frequencies_ghz: &[f64],
    seed: u64,
) -> Result<Vec<Execution>> {
    if !timeline.events.iter().any(|e| matches!(e.payload, Payload::MwOn { .. })) {
        return Err(Error::Compile("sweep requested but the plan never turns the microwave on".into()));
    }
    let run = |(i, &f): (usize, &f64)| -> Result<Execution> {
        let mut t = timeline.clone();
        for e in &mut t.events {
            if let Payload::MwOn { frequency_ghz } = &mut e.payload {
                *frequency_ghz = f;
            }
        }
        execute_plan(&t, sample, physics, derive_seed(seed, "sweep", i as u64))
    };
    #[cfg(feature = "parallel")]
    let out: Vec<Result<Execution>> = {
        use rayon::prelude::*;
        frequencies_ghz.par_iter().enumerate().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out: Vec<Result<Execution>> = frequencies_ghz.iter().enumerate().map(run).collect();
    out.into_iter().collect()
}
