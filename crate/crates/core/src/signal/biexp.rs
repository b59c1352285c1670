use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{
    levenberg_marquardt, linear_fit, seed_exponential, CurveModel, Estimate, ExpDecay, LmOptions,
};

/// `A1·e^(−t/T1) + A2·e^(−t/T2)` with parameters `[A1, T1, A2, T2]`.
pub struct Biexponential;

impl CurveModel for Biexponential {
    fn n_params(&self) -> usize {
        4
    }
    fn value(&self, p: &[f64], t: f64) -> f64 {
        p[0] * (-t / p[1]).exp() + p[2] * (-t / p[3]).exp()
    }
    fn gradient(&self, p: &[f64], t: f64, g: &mut [f64]) {
        let e1 = (-t / p[1]).exp();
        let e2 = (-t / p[3]).exp();
        g[0] = e1;
        g[1] = p[0] * e1 * t / (p[1] * p[1]);
        g[2] = e2;
        g[3] = p[2] * e2 * t / (p[3] * p[3]);
    }
    fn feasible(&self, p: &[f64]) -> bool {
        p[1] > 0.0 && p[3] > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiexpOptions {
    /// Time constants closer than this ratio are treated as one component.
    pub degeneracy_ratio: f64,
    /// Components carrying less than this fraction of the total amplitude
    /// are dropped.
    pub min_amplitude_fraction: f64,
}

impl Default for BiexpOptions {
    fn default() -> Self {
        BiexpOptions {
            degeneracy_ratio: 1.05,
            min_amplitude_fraction: 1e-3,
        }
    }
}

/// Canonically ordered: `t2_1 <= t2_2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiexpFit {
    pub a1: Estimate,
    pub t2_1_s: Estimate,
    pub a2: Estimate,
    pub t2_2_s: Estimate,
    pub residual_norm: f64,
    pub iterations: usize,
    /// True when the fit fell back to a single exponential.
    pub collapsed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Log-linear seeds from two segments: the late half fixes the slow
/// component, the early residual the fast one.
fn two_segment_seed(t: &[f64], y: &[f64]) -> [f64; 4] {
    let n = t.len();
    let (a2, t2) = seed_exponential(&t[n / 2..], &y[n / 2..]);
    let early = (n / 3).max(3);
    let (lt, lr): (Vec<f64>, Vec<f64>) = t[..early]
        .iter()
        .zip(&y[..early])
        .map(|(&ti, &yi)| (ti, yi - a2 * (-ti / t2).exp()))
        .filter(|(_, r)| *r > 0.0)
        .map(|(ti, r)| (ti, r.ln()))
        .unzip();
    match linear_fit(&lt, &lr) {
        Some((c, b)) if b < 0.0 && -1.0 / b < t2 => [c.exp(), -1.0 / b, a2, t2],
        _ => [0.5 * y[0].abs().max(a2), t2 / 10.0, a2, t2],
    }
}

pub fn fit_biexponential(times: &[f64], values: &[f64], opts: &BiexpOptions) -> Result<BiexpFit> {
    if times.len() != values.len() {
        return Err(Error::Domain("times and values differ in length".into()));
    }
    if times.len() < 6 {
        return Err(Error::Domain(format!("{} points; at least 6 required", times.len())));
    }
    if times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("times must be non-negative and strictly ascending".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite value".into()));
    }

    let lm = LmOptions::default();
    let seed = two_segment_seed(times, values);
    let reason = match levenberg_marquardt(&Biexponential, times, values, &seed, &lm) {
        Ok(sol) => match sol.estimates() {
            Ok(est) => {
                let (mut fast, mut slow) = ((est[0], est[1]), (est[2], est[3]));
                if fast.1.value > slow.1.value {
                    std::mem::swap(&mut fast, &mut slow);
                }
                let total = fast.0.value + slow.0.value;
                let weakest = fast.0.value.min(slow.0.value);
                if weakest < 0.0 {
                    Some("negative component amplitude".to_string())
                } else if total <= 0.0 || weakest < opts.min_amplitude_fraction * total {
                    Some(format!("one component carries < {} of the amplitude", opts.min_amplitude_fraction))
                } else if slow.1.value / fast.1.value < opts.degeneracy_ratio {
                    Some(format!(
                        "time constants {:.4e} s and {:.4e} s are within ratio {}",
                        fast.1.value, slow.1.value, opts.degeneracy_ratio
                    ))
                } else {
                    return Ok(BiexpFit {
                        a1: fast.0,
                        t2_1_s: fast.1,
                        a2: slow.0,
                        t2_2_s: slow.1,
                        residual_norm: sol.residual_norm(),
                        iterations: sol.iterations,
                        collapsed: false,
                        warnings: Vec::new(),
                    });
                }
            }
            Err(f) => Some(f.to_string()),
        },
        Err(f) => Some(f.to_string()),
    };

    let (a0, t0) = seed_exponential(times, values);
    let sol = levenberg_marquardt(&ExpDecay, times, values, &[a0, t0], &lm)?;
    let est = sol.estimates()?;
    let zero = Estimate {
        value: 0.0,
        std_err: 0.0,
        ci_low: 0.0,
        ci_high: 0.0,
    };
    Ok(BiexpFit {
        a1: est[0],
        t2_1_s: est[1],
        a2: zero,
        t2_2_s: est[1],
        residual_norm: sol.residual_norm(),
        iterations: sol.iterations,
        collapsed: true,
        warnings: vec![format!(
            "degenerate biexponential ({}); reporting a single exponential",
            reason.unwrap_or_default()
        )],
    })
}
