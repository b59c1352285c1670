//! Damped least squares (Levenberg-Marquardt) with analytic Jacobians and
//! linearized confidence intervals.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided confidence level used for every reported interval.
pub const CONFIDENCE: f64 = 0.95;

/// A curve `y = f(x; params)` with an analytic gradient in `params`.
pub trait CurveModel {
    fn n_params(&self) -> usize;
    fn value(&self, params: &[f64], x: f64) -> f64;
    fn gradient(&self, params: &[f64], x: f64, grad: &mut [f64]);
    /// Feasible region; steps leaving it are rejected like uphill steps.
    fn feasible(&self, _params: &[f64]) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFailureKind {
    NonConvergence,
    RankDeficient,
    ZeroSignal,
    InsufficientData,
    NonPhysical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub kind: FitFailureKind,
    pub message: String,
    pub residual_norm: Option<f64>,
    pub iterations: usize,
}

impl FitFailure {
    pub fn new(kind: FitFailureKind, message: impl Into<String>) -> Self {
        FitFailure {
            kind,
            message: message.into(),
            residual_norm: None,
            iterations: 0,
        }
    }
}

impl fmt::Display for FitFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)?;
        if let Some(r) = self.residual_norm {
            write!(f, " (residual norm {r:e}, {} iterations)", self.iterations)?;
        }
        Ok(())
    }
}

/// Point estimate with standard error and a 95 % interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn symmetric(value: f64, std_err: f64, quantile: f64) -> Self {
        Estimate {
            value,
            std_err,
            ci_low: value - quantile * std_err,
            ci_high: value + quantile * std_err,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// Two-sided Student-t quantile for [`CONFIDENCE`] with `dof` degrees of freedom.
pub fn t_quantile(dof: usize) -> f64 {
    let p = 0.5 + 0.5 * CONFIDENCE;
    match StudentsT::new(0.0, 1.0, dof.max(1) as f64) {
        Ok(t) => t.inverse_cdf(p),
        Err(_) => 1.959_963_984_540_054,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub cost_tolerance: f64,
    pub step_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 500,
            cost_tolerance: 1e-14,
            step_tolerance: 1e-13,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmSolution {
    pub params: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub n_points: usize,
    jtj: DMatrix<f64>,
}

impl LmSolution {
    pub fn residual_norm(&self) -> f64 {
        self.cost.sqrt()
    }

    pub fn dof(&self) -> usize {
        self.n_points.saturating_sub(self.params.len())
    }

    /// `s^2 (J^T J)^-1` with `s^2 = RSS / (n - p)`.
    pub fn covariance(&self) -> Result<DMatrix<f64>, FitFailure> {
        let dof = self.dof();
        if dof == 0 {
            return Err(FitFailure::new(
                FitFailureKind::InsufficientData,
                "no residual degrees of freedom",
            ));
        }
        let p = self.params.len();
        // Scale to unit diagonal before inverting so badly scaled parameters
        // (seconds vs. 1e-3 amplitudes) do not trip the rank test.
        let d: Vec<f64> = (0..p).map(|i| self.jtj[(i, i)].sqrt()).collect();
        if d.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(self.rank_failure("parameter with zero sensitivity"));
        }
        let scaled = DMatrix::from_fn(p, p, |i, j| self.jtj[(i, j)] / (d[i] * d[j]));
        let eig = nalgebra::SymmetricEigen::new(scaled.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        if !(min > max * 1e-13) {
            return Err(self.rank_failure("ill-conditioned normal matrix"));
        }
        let inv = scaled
            .cholesky()
            .ok_or_else(|| self.rank_failure("normal matrix not positive definite"))?
            .inverse();
        let s2 = self.cost / dof as f64;
        Ok(DMatrix::from_fn(p, p, |i, j| s2 * inv[(i, j)] / (d[i] * d[j])))
    }

    /// Estimates with t-based 95 % intervals.
    pub fn estimates(&self) -> Result<Vec<Estimate>, FitFailure> {
        let cov = self.covariance()?;
        let q = t_quantile(self.dof());
        Ok(self
            .params
            .iter()
            .enumerate()
            .map(|(i, &v)| Estimate::symmetric(v, cov[(i, i)].max(0.0).sqrt(), q))
            .collect())
    }

    fn rank_failure(&self, msg: &str) -> FitFailure {
        FitFailure {
            kind: FitFailureKind::RankDeficient,
            message: msg.to_string(),
            residual_norm: Some(self.residual_norm()),
            iterations: self.iterations,
        }
    }
}

fn build_normal<M: CurveModel>(
    model: &M,
    params: &[f64],
    x: &[f64],
    y: &[f64],
) -> (DMatrix<f64>, DVector<f64>, f64) {
    let p = model.n_params();
    let mut jtj = DMatrix::zeros(p, p);
    let mut jtr = DVector::zeros(p);
    let mut cost = 0.0;
    let mut g = vec![0.0; p];
    for (&xi, &yi) in x.iter().zip(y) {
        let r = yi - model.value(params, xi);
        model.gradient(params, xi, &mut g);
        cost += r * r;
        for a in 0..p {
            jtr[a] += g[a] * r;
            for b in 0..=a {
                jtj[(a, b)] += g[a] * g[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            jtj[(b, a)] = jtj[(a, b)];
        }
    }
    (jtj, jtr, cost)
}

fn cost_of<M: CurveModel>(model: &M, params: &[f64], x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - model.value(params, xi);
            r * r
        })
        .sum()
}

/// Minimize `sum (y - f(x))^2` starting from `initial`.
pub fn levenberg_marquardt<M: CurveModel>(
    model: &M,
    x: &[f64],
    y: &[f64],
    initial: &[f64],
    opts: &LmOptions,
) -> Result<LmSolution, FitFailure> {
    let p = model.n_params();
    assert_eq!(initial.len(), p, "initial guess has wrong length");
    if x.len() != y.len() {
        return Err(FitFailure::new(
            FitFailureKind::InsufficientData,
            "abscissa and ordinate lengths differ",
        ));
    }
    if x.len() < p {
        return Err(FitFailure::new(
            FitFailureKind::InsufficientData,
            format!("{} points for {} parameters", x.len(), p),
        ));
    }
    if !model.feasible(initial) {
        return Err(FitFailure::new(
            FitFailureKind::NonPhysical,
            "initial guess outside the feasible region",
        ));
    }
    let signal: f64 = y.iter().map(|v| v * v).sum();
    let floor = signal * 1e-28;

    let mut params = initial.to_vec();
    let (mut jtj, mut jtr, mut cost) = build_normal(model, &params, x, y);
    let mut lambda = opts.initial_damping;
    let mut iterations = 0;
    let mut converged = cost <= floor;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let mut a = jtj.clone();
        for i in 0..p {
            a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
        }
        let step = match a.clone().cholesky() {
            Some(ch) => ch.solve(&jtr),
            None => {
                lambda *= 10.0;
                if lambda > 1e16 {
                    break;
                }
                continue;
            }
        };
        let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
        let trial_cost = if model.feasible(&trial) && trial.iter().all(|v| v.is_finite()) {
            cost_of(model, &trial, x, y)
        } else {
            f64::INFINITY
        };
        if trial_cost < cost {
            let rel_drop = (cost - trial_cost) / cost.max(1e-300);
            let rel_step = step
                .iter()
                .zip(&trial)
                .map(|(s, v)| (s / v.abs().max(1e-300)).abs())
                .fold(0.0, f64::max);
            params = trial;
            let (j2, r2, c2) = build_normal(model, &params, x, y);
            jtj = j2;
            jtr = r2;
            cost = c2;
            lambda = (lambda / 10.0).max(1e-15);
            if cost <= floor || rel_drop < opts.cost_tolerance || rel_step < opts.step_tolerance {
                converged = true;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e16 {
                // No downhill direction left at machine precision: a minimum.
                converged = true;
            }
        }
    }

    if !converged {
        return Err(FitFailure {
            kind: FitFailureKind::NonConvergence,
            message: format!("no convergence after {iterations} iterations"),
            residual_norm: Some(cost.sqrt()),
            iterations,
        });
    }
    Ok(LmSolution {
        params,
        cost,
        iterations,
        n_points: x.len(),
        jtj,
    })
}

/// `A exp(-x/T)`, params `[A, T]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExpDecay;

impl CurveModel for ExpDecay {
    fn n_params(&self) -> usize {
        2
    }
    fn value(&self, p: &[f64], x: f64) -> f64 {
        p[0] * (-x / p[1]).exp()
    }
    fn gradient(&self, p: &[f64], x: f64, g: &mut [f64]) {
        let e = (-x / p[1]).exp();
        g[0] = e;
        g[1] = p[0] * e * x / (p[1] * p[1]);
    }
    fn feasible(&self, p: &[f64]) -> bool {
        p[1] > 0.0
    }
}

/// Ordinary least squares line `y = a + b x`; returns `(a, b)`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

/// Log-linear seed for a single exponential; falls back to the time span.
pub(crate) fn seed_exponential(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&a, &b)| (a, b.ln()))
        .unzip();
    let span = x.last().copied().unwrap_or(1.0) - x.first().copied().unwrap_or(0.0);
    match linear_fit(&lx, &ly) {
        Some((a, b)) if b < 0.0 => (a.exp(), -1.0 / b),
        _ => (y.first().copied().unwrap_or(1.0), span.max(1e-12) / 3.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_quantile_reference_values() {
        assert!((t_quantile(10) - 2.228_138_851_986_274).abs() < 1e-9);
        assert!((t_quantile(100_000) - 1.959_99).abs() < 1e-3);
    }

    #[test]
    fn exponential_round_trip() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|t| 3.0 * (-t / 4.2_f64).exp()).collect();
        let sol = levenberg_marquardt(&ExpDecay, &x, &y, &[1.0, 1.0], &LmOptions::default()).unwrap();
        assert!((sol.params[0] - 3.0).abs() < 1e-9);
        assert!((sol.params[1] - 4.2).abs() < 1e-9);
    }

    #[test]
    fn zero_sensitivity_is_rank_deficient() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y = vec![0.0; 10];
        let sol = levenberg_marquardt(&ExpDecay, &x, &y, &[0.0, 1.0], &LmOptions::default()).unwrap();
        let err = sol.covariance().unwrap_err();
        assert_eq!(err.kind, FitFailureKind::RankDeficient);
    }

    #[test]
    fn too_few_points() {
        let err =
            levenberg_marquardt(&ExpDecay, &[1.0], &[1.0], &[1.0, 1.0], &LmOptions::default())
                .unwrap_err();
        assert_eq!(err.kind, FitFailureKind::InsufficientData);
    }
}
