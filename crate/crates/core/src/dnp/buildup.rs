use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, CurveModel, Estimate, FitFailure, FitFailureKind, LmOptions};
use crate::seed::rng_from_seed;

/// Exponential relaxation of `p0` toward `target` over `dt` with time
/// constant `tau`. Shared by every integrator in the crate.
pub fn relax_toward(p0: f64, target: f64, dt: f64, tau: f64) -> f64 {
    p0 + (target - p0) * -(-dt / tau).exp_m1()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildupCurve {
    pub times_s: Vec<f64>,
    pub polarization: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<Vec<f64>>,
}

impl BuildupCurve {
    pub fn new(times_s: Vec<f64>, polarization: Vec<f64>) -> Result<Self> {
        let c = BuildupCurve {
            times_s,
            polarization,
            uncertainty: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times_s.len() != self.polarization.len() {
            return Err(Error::Domain("times and polarization lengths differ".into()));
        }
        if let Some(u) = &self.uncertainty {
            if u.len() != self.times_s.len() {
                return Err(Error::Domain("uncertainty length differs".into()));
            }
        }
        if self.times_s.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::Domain("times must be non-negative".into()));
        }
        if self.times_s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("times must be strictly ascending".into()));
        }
        Ok(())
    }
}

/// `P(t) = P_max (1 − exp(−t/T_DNP))` sampled at `times_s`, plus Gaussian
/// noise of standard deviation `noise_sigma`.
pub fn simulate_buildup(
    t_dnp_s: f64,
    p_max: f64,
    times_s: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<BuildupCurve> {
    if !(t_dnp_s > 0.0) {
        return Err(Error::Domain("T_DNP must be positive".into()));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::Domain("noise sigma must be non-negative".into()));
    }
    let mut polarization: Vec<f64> = times_s
        .iter()
        .map(|&t| relax_toward(0.0, p_max, t, t_dnp_s))
        .collect();
    if noise_sigma > 0.0 {
        let mut rng = rng_from_seed(seed);
        let normal = Normal::new(0.0, noise_sigma).expect("sigma checked above");
        for p in &mut polarization {
            *p += normal.sample(&mut rng);
        }
    }
    BuildupCurve::new(times_s.to_vec(), polarization)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Polarization starts at exactly zero.
    #[default]
    Fixed,
    /// Adds a constant offset parameter.
    Free,
}

struct Saturation {
    free_baseline: bool,
}

impl CurveModel for Saturation {
    fn n_params(&self) -> usize {
        if self.free_baseline { 3 } else { 2 }
    }
    fn value(&self, p: &[f64], t: f64) -> f64 {
        let base = if self.free_baseline { p[2] } else { 0.0 };
        base + p[0] * -(-t / p[1]).exp_m1()
    }
    fn gradient(&self, p: &[f64], t: f64, g: &mut [f64]) {
        let e = (-t / p[1]).exp();
        g[0] = -(-t / p[1]).exp_m1();
        g[1] = -p[0] * e * t / (p[1] * p[1]);
        if self.free_baseline {
            g[2] = 1.0;
        }
    }
    fn feasible(&self, p: &[f64]) -> bool {
        p[1] > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildupFit {
    pub t_dnp_s: Estimate,
    pub p_max: Estimate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Estimate>,
    pub residual_norm: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Nonlinear least-squares fit of the saturation-recovery buildup model.
pub fn fit_buildup(curve: &BuildupCurve, mode: BaselineMode) -> Result<BuildupFit> {
    curve.validate()?;
    let (t, y) = (&curve.times_s, &curve.polarization);
    if t.len() < 4 {
        return Err(Error::Domain(format!("{} points; at least 4 required", t.len())));
    }
    let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || y.iter().any(|v| !v.is_finite()) {
        return Err(FitFailure::new(FitFailureKind::ZeroSignal, "buildup signal is identically zero")
            .into());
    }

    // Seed: plateau from the last tenth, time constant from the 1 − 1/e crossing.
    let tail = (t.len() / 10).max(1);
    let plateau = y[y.len() - tail..].iter().sum::<f64>() / tail as f64;
    let target = plateau * (1.0 - (-1.0_f64).exp());
    let span = t[t.len() - 1] - t[0];
    let t0 = t
        .iter()
        .zip(y)
        .find(|(_, &v)| if plateau >= 0.0 { v >= target } else { v <= target })
        .map(|(&ti, _)| ti)
        .filter(|&ti| ti > 0.0)
        .unwrap_or(span / 3.0)
        .max(span * 1e-3);

    let model = Saturation {
        free_baseline: mode == BaselineMode::Free,
    };
    let mut init = vec![if plateau != 0.0 { plateau } else { scale }, t0];
    if model.free_baseline {
        init.push(0.0);
    }
    let sol = levenberg_marquardt(&model, t, y, &init, &LmOptions::default())?;
    let est = sol.estimates()?;
    let mut warnings = Vec::new();
    if est[1].value > span {
        warnings.push(format!(
            "time grid spans {span:.3} s, shorter than the fitted T_DNP {:.3} s",
            est[1].value
        ));
    }
    Ok(BuildupFit {
        p_max: est[0],
        t_dnp_s: est[1],
        baseline: model.free_baseline.then(|| est[2]),
        residual_norm: sol.residual_norm(),
        iterations: sol.iterations,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, end: f64) -> Vec<f64> {
        (0..n).map(|i| end * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn analytic_points() {
        let c = simulate_buildup(10.0, 2e-3, &[0.0, 10.0, 100.0], 0.0, 0).unwrap();
        assert_eq!(c.polarization[0], 0.0);
        assert!((c.polarization[1] / 2e-3 - 0.632_120_558_828_557_7).abs() < 1e-15);
        assert!((c.polarization[2] / 2e-3 - 1.0).abs() < 5e-5);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let t = grid(20, 60.0);
        let a = simulate_buildup(15.0, 1.0, &t, 0.01, 9).unwrap();
        let b = simulate_buildup(15.0, 1.0, &t, 0.01, 9).unwrap();
        let c = simulate_buildup(15.0, 1.0, &t, 0.01, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_signal_is_an_error() {
        let c = BuildupCurve::new(grid(10, 60.0), vec![0.0; 10]).unwrap();
        let err = fit_buildup(&c, BaselineMode::Fixed).unwrap_err();
        assert!(matches!(err, Error::Fit(f) if f.kind == FitFailureKind::ZeroSignal));
    }

    #[test]
    fn degenerate_grids() {
        assert!(BuildupCurve::new(vec![0.0, 1.0, 1.0], vec![0.0; 3]).is_err());
        let c = BuildupCurve::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 0.7]).unwrap();
        assert!(matches!(fit_buildup(&c, BaselineMode::Fixed), Err(Error::Domain(_))));
    }

    #[test]
    fn free_baseline_recovers_offset() {
        let t = grid(40, 80.0);
        let y: Vec<f64> = t.iter().map(|&x| 0.1 + relax_toward(0.0, 1.0, x, 12.0)).collect();
        let f = fit_buildup(&BuildupCurve::new(t, y).unwrap(), BaselineMode::Free).unwrap();
        assert!((f.t_dnp_s.value - 12.0).abs() < 1e-6);
        assert!((f.baseline.unwrap().value - 0.1).abs() < 1e-8);
    }
}
