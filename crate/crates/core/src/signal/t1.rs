use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, seed_exponential, Estimate, ExpDecay, FitFailure, FitFailureKind, LmOptions};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallFlipT1 {
    pub t1_s: Estimate,
    pub observed_s: Estimate,
    /// `−ln(cos θ) / τ`, the extra decay rate from readout depletion (1/s).
    pub depletion_rate_per_s: f64,
    pub residual_norm: f64,
}

fn check_angle(theta_rad: f64, tau_s: f64) -> Result<()> {
    if !(theta_rad > 0.0 && theta_rad < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!("flip angle {theta_rad} rad outside (0, π/2)")));
    }
    if !(tau_s > 0.0) {
        return Err(Error::Domain("pulse spacing must be positive".into()));
    }
    Ok(())
}

/// Readouts `M_k = sin θ · cos^k θ · e^(−kτ/T1)` for k = 0..n plus Gaussian noise.
pub fn simulate_small_flip(
    t1_s: f64,
    theta_rad: f64,
    tau_s: f64,
    n: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    check_angle(theta_rad, tau_s)?;
    if !(t1_s > 0.0) || !(noise_sigma >= 0.0) {
        return Err(Error::Domain("T1 must be positive and noise non-negative".into()));
    }
    let (s, c) = theta_rad.sin_cos();
    let mut out: Vec<f64> = (0..n)
        .map(|k| s * c.powi(k as i32) * (-(k as f64) * tau_s / t1_s).exp())
        .collect();
    if noise_sigma > 0.0 {
        let mut rng = rng_from_seed(seed);
        let normal = Normal::new(0.0, noise_sigma).expect("sigma checked");
        for v in &mut out {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Exponential fit of a small-flip readout series (one value per pulse,
/// pulses `tau_s` apart) followed by removal of the cos θ depletion:
/// `1/T1 = 1/T_obs − (−ln cos θ)/τ`.
pub fn fit_t1_small_flip(series: &[f64], theta_rad: f64, tau_s: f64) -> Result<SmallFlipT1> {
    check_angle(theta_rad, tau_s)?;
    if series.len() < 4 {
        return Err(Error::Domain(format!("{} readouts; at least 4 required", series.len())));
    }
    let t: Vec<f64> = (0..series.len()).map(|k| k as f64 * tau_s).collect();
    let init = seed_exponential(&t, series);
    let sol = levenberg_marquardt(&ExpDecay, &t, series, &[init.0, init.1], &LmOptions::default())?;
    let obs = sol.estimates()?[1];
    let rate = -theta_rad.cos().ln() / tau_s;
    let correct = |t_obs: f64| {
        let r = 1.0 / t_obs - rate;
        if r > 0.0 { 1.0 / r } else { f64::INFINITY }
    };
    let t1 = correct(obs.value);
    if !t1.is_finite() {
        return Err(FitFailure {
            kind: FitFailureKind::NonPhysical,
            message: format!(
                "observed decay {:.4} s is slower than the readout depletion alone",
                obs.value
            ),
            residual_norm: Some(sol.residual_norm()),
            iterations: sol.iterations,
        }
        .into());
    }
    // The map T_obs → T1 is increasing, so interval bounds transform directly.
    let se = obs.std_err * (t1 / obs.value).powi(2);
    Ok(SmallFlipT1 {
        t1_s: Estimate {
            value: t1,
            std_err: se,
            ci_low: correct(obs.ci_low.max(f64::MIN_POSITIVE)),
            ci_high: correct(obs.ci_high),
        },
        observed_s: obs,
        depletion_rate_per_s: rate,
        residual_norm: sol.residual_norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observed_constant_for_ten_degrees() {
        let th = 10.12_f64.to_radians();
        let s = simulate_small_flip(13.08, th, 1.0, 40, 0.0, 0).unwrap();
        let f = fit_t1_small_flip(&s, th, 1.0).unwrap();
        assert!((f.observed_s.value - 10.8539).abs() < 1e-3);
        assert!((f.t1_s.value - 13.08).abs() < 1e-6);
    }

    #[test]
    fn angle_domain() {
        let s = [1.0, 0.9, 0.8, 0.7];
        assert!(fit_t1_small_flip(&s, std::f64::consts::FRAC_PI_2, 1.0).is_err());
        assert!(fit_t1_small_flip(&s, 0.0, 1.0).is_err());
    }
}
