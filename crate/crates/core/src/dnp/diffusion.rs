//! Radial spin-diffusion model: polarization is pumped into a thin shell
//! around the NV barrier radius and spreads outward through a spherical
//! domain with a reflecting outer wall.
//!
//! Conservative finite volumes on a uniform radial mesh. Lengths in nm,
//! diffusion coefficient in nm²/s.

use serde::{Deserialize, Serialize};

use super::BuildupCurve;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionScheme {
    /// Backward Euler; unconditionally stable.
    #[default]
    Implicit,
    /// Forward Euler; requires `dt <= dr² / (2·3·D)`.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub diffusion_nm2_per_s: f64,
    /// Nuclear T1; `f64::INFINITY` disables relaxation.
    pub t1n_s: f64,
    pub inner_radius_nm: f64,
    pub outer_radius_nm: f64,
    pub source_width_nm: f64,
    /// Pump rate toward `source_polarization` inside the source shell (1/s).
    pub source_rate_per_s: f64,
    pub source_polarization: f64,
    pub cells: usize,
    pub dt_s: f64,
    pub scheme: DiffusionScheme,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            diffusion_nm2_per_s: 1.0,
            t1n_s: 60.0,
            inner_radius_nm: 1.0,
            outer_radius_nm: 10.0,
            source_width_nm: 1.0,
            source_rate_per_s: 1.0,
            source_polarization: 1.0,
            cells: 90,
            dt_s: 0.02,
            scheme: DiffusionScheme::Implicit,
        }
    }
}

impl DiffusionConfig {
    pub fn cell_width(&self) -> f64 {
        (self.outer_radius_nm - self.inner_radius_nm) / self.cells as f64
    }

    fn source_cells(&self) -> Result<usize> {
        let dr = self.cell_width();
        let n = (self.source_width_nm / dr).round();
        if n < 1.0 || (n * dr - self.source_width_nm).abs() > 1e-9 * self.source_width_nm {
            return Err(Error::Config(format!(
                "source width {} nm is not a whole number of cells of width {dr} nm",
                self.source_width_nm
            )));
        }
        if n as usize >= self.cells {
            return Err(Error::Config("source shell fills the whole domain".into()));
        }
        Ok(n as usize)
    }

    pub fn stable_explicit_dt(&self) -> f64 {
        let dr = self.cell_width();
        if self.diffusion_nm2_per_s == 0.0 {
            f64::INFINITY
        } else {
            dr * dr / (2.0 * 3.0 * self.diffusion_nm2_per_s)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.diffusion_nm2_per_s >= 0.0) {
            return bad("diffusion coefficient must be >= 0");
        }
        if !(self.t1n_s > 0.0) {
            return bad("T1 must be positive");
        }
        if !(self.inner_radius_nm >= 0.0) || !(self.outer_radius_nm > self.inner_radius_nm) {
            return bad("need 0 <= inner radius < outer radius");
        }
        if !(self.source_rate_per_s >= 0.0) {
            return bad("source rate must be >= 0");
        }
        if self.cells < 2 || !(self.dt_s > 0.0) {
            return bad("need at least 2 cells and a positive time step");
        }
        self.source_cells()?;
        if self.scheme == DiffusionScheme::Explicit {
            let limit = self.stable_explicit_dt();
            if self.dt_s > limit {
                return Err(Error::Config(format!(
                    "explicit step {} s exceeds stability limit {limit:e} s",
                    self.dt_s
                )));
            }
            let decay = self.source_rate_per_s + 1.0 / self.t1n_s;
            if self.dt_s * decay >= 1.0 {
                return bad("explicit step too large for the relaxation/source rates");
            }
        }
        Ok(())
    }
}

/// Time stepper holding the cell polarizations.
#[derive(Debug, Clone)]
pub struct DiffusionSolver {
    cfg: DiffusionConfig,
    volumes: Vec<f64>,
    /// `D·A/dr` for the face between cell i and i + 1.
    couplings: Vec<f64>,
    n_source: usize,
    polarization: Vec<f64>,
    time: f64,
}

impl DiffusionSolver {
    pub fn new(cfg: DiffusionConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.cells;
        let dr = cfg.cell_width();
        let face = |i: usize| cfg.inner_radius_nm + i as f64 * dr;
        let volumes = (0..n).map(|i| (face(i + 1).powi(3) - face(i).powi(3)) / 3.0).collect();
        let couplings = (0..n - 1)
            .map(|i| cfg.diffusion_nm2_per_s * face(i + 1).powi(2) / dr)
            .collect();
        Ok(DiffusionSolver {
            n_source: cfg.source_cells()?,
            cfg,
            volumes,
            couplings,
            polarization: vec![0.0; n],
            time: 0.0,
        })
    }

    pub fn with_initial(mut self, p: Vec<f64>) -> Result<Self> {
        if p.len() != self.cfg.cells {
            return Err(Error::Config("initial profile length differs from cell count".into()));
        }
        self.polarization = p;
        Ok(self)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn polarization(&self) -> &[f64] {
        &self.polarization
    }

    /// Volume-weighted total over all cells.
    pub fn total(&self) -> f64 {
        self.volumes.iter().zip(&self.polarization).map(|(v, p)| v * p).sum()
    }

    /// Volume-weighted mean outside the source shell.
    pub fn bulk_average(&self) -> f64 {
        let s = self.n_source;
        let vol: f64 = self.volumes[s..].iter().sum();
        self.volumes[s..]
            .iter()
            .zip(&self.polarization[s..])
            .map(|(v, p)| v * p)
            .sum::<f64>()
            / vol
    }

    fn sink_rate(&self, i: usize) -> (f64, f64) {
        let relax = 1.0 / self.cfg.t1n_s;
        if i < self.n_source {
            (
                relax + self.cfg.source_rate_per_s,
                self.cfg.source_rate_per_s * self.cfg.source_polarization,
            )
        } else {
            (relax, 0.0)
        }
    }

    pub fn step(&mut self, dt: f64) {
        match self.cfg.scheme {
            DiffusionScheme::Explicit => self.step_explicit(dt),
            DiffusionScheme::Implicit => self.step_implicit(dt),
        }
        self.time += dt;
    }

    fn step_explicit(&mut self, dt: f64) {
        let p = &self.polarization;
        let n = p.len();
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let mut flux = 0.0;
                if i > 0 {
                    flux += self.couplings[i - 1] * (p[i - 1] - p[i]);
                }
                if i + 1 < n {
                    flux += self.couplings[i] * (p[i + 1] - p[i]);
                }
                let (rate, drive) = self.sink_rate(i);
                p[i] + dt * (flux / self.volumes[i] - rate * p[i] + drive)
            })
            .collect();
        self.polarization = next;
    }

    fn step_implicit(&mut self, dt: f64) {
        let n = self.polarization.len();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let v = self.volumes[i];
            let (rate, drive) = self.sink_rate(i);
            diag[i] = v / dt + v * rate;
            rhs[i] = v / dt * self.polarization[i] + v * drive;
            if i > 0 {
                let c = self.couplings[i - 1];
                diag[i] += c;
                lower[i] = -c;
            }
            if i + 1 < n {
                let c = self.couplings[i];
                diag[i] += c;
                upper[i] = -c;
            }
        }
        self.polarization = solve_tridiagonal(&lower, &diag, &upper, rhs);
    }

    /// Advance to `t_end`, splitting the interval into equal steps no longer
    /// than the configured `dt`.
    pub fn advance_to(&mut self, t_end: f64) {
        let span = t_end - self.time;
        if span <= 0.0 {
            return;
        }
        let steps = (span / self.cfg.dt_s - 1e-9).ceil().max(1.0) as usize;
        let dt = span / steps as f64;
        for _ in 0..steps {
            self.step(dt);
        }
        self.time = t_end;
    }
}

/// Thomas algorithm; `lower[0]` and `upper[n-1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], mut rhs: Vec<f64>) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = diag[0];
    c[0] = upper[0] / d;
    rhs[0] /= d;
    for i in 1..n {
        d = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / d;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / d;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    rhs
}

/// Bulk-averaged polarization sampled at `times_s`, starting from zero.
pub fn diffusion_buildup(cfg: &DiffusionConfig, times_s: &[f64]) -> Result<BuildupCurve> {
    let mut solver = DiffusionSolver::new(*cfg)?;
    let mut out = Vec::with_capacity(times_s.len());
    for &t in times_s {
        if t < solver.time() {
            return Err(Error::Domain("sample times must be ascending".into()));
        }
        solver.advance_to(t);
        out.push(solver.bulk_average());
    }
    BuildupCurve::new(times_s.to_vec(), out)
}
