//! Composite ODMR spectra of an ensemble with random first-shell ¹³C
//! occupation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{
    build_hamiltonian, eigendecompose, transition_lines, Branch, FirstShellConfig,
    HyperfineTensor, NvParameters, TransitionLine, TransitionOptions, FIRST_SHELL_SITES,
};

/// ¹³C fraction of carbon sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Enrichment(f64);

impl Enrichment {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("enrichment {p} outside [0, 1]")));
        }
        Ok(Enrichment(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Enrichment {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        Enrichment::new(p)
    }
}

impl From<Enrichment> for f64 {
    fn from(e: Enrichment) -> f64 {
        e.0
    }
}

/// Binomial probabilities that 0, 1, 2 or 3 first-shell sites hold ¹³C.
pub fn occupancy_weights(p: Enrichment) -> [f64; 4] {
    let p = p.value();
    let q = 1.0 - p;
    [q * q * q, 3.0 * p * q * q, 3.0 * p * p * q, p * p * p]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Lorentzian,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineshapeParams {
    pub profile: Profile,
    pub fwhm_mhz: f64,
}

impl Default for LineshapeParams {
    fn default() -> Self {
        LineshapeParams {
            profile: Profile::Lorentzian,
            fwhm_mhz: 8.0,
        }
    }
}

impl LineshapeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm_mhz > 0.0) || !self.fwhm_mhz.is_finite() {
            return Err(Error::InvalidParameter("fwhm must be positive".into()));
        }
        Ok(())
    }

    /// Unit-area profile density (per MHz) at detuning `x_mhz`.
    pub fn density(&self, x_mhz: f64) -> f64 {
        match self.profile {
            Profile::Lorentzian => {
                let g = 0.5 * self.fwhm_mhz;
                g / (std::f64::consts::PI * (x_mhz * x_mhz + g * g))
            }
            Profile::Gaussian => {
                let s = self.fwhm_mhz / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
                (-0.5 * (x_mhz / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
            }
        }
    }
}

/// Uniform frequency grid, stored as centre and step so that offsets from the
/// centre are exactly mirror-symmetric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub center_ghz: f64,
    pub step_mhz: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn centered(center_ghz: f64, span_mhz: f64, points: usize) -> Result<Self> {
        if points < 2 || !(span_mhz > 0.0) {
            return Err(Error::Grid("grid needs at least 2 points and a positive span".into()));
        }
        Ok(GridSpec {
            center_ghz,
            step_mhz: span_mhz / (points - 1) as f64,
            points,
        })
    }

    pub fn range(start_ghz: f64, stop_ghz: f64, points: usize) -> Result<Self> {
        if !(stop_ghz > start_ghz) {
            return Err(Error::Grid("grid stop must exceed start".into()));
        }
        Self::centered(0.5 * (start_ghz + stop_ghz), (stop_ghz - start_ghz) * 1e3, points)
    }

    pub fn offset_mhz(&self, i: usize) -> f64 {
        (i as f64 - 0.5 * (self.points - 1) as f64) * self.step_mhz
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.points)
            .map(|i| self.center_ghz + self.offset_mhz(i) * 1e-3)
            .collect()
    }

    pub fn start_ghz(&self) -> f64 {
        self.center_ghz + self.offset_mhz(0) * 1e-3
    }

    pub fn stop_ghz(&self) -> f64 {
        self.center_ghz + self.offset_mhz(self.points - 1) * 1e-3
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 || !(self.step_mhz > 0.0) || !self.center_ghz.is_finite() {
            return Err(Error::Grid("invalid grid specification".into()));
        }
        Ok(())
    }
}

/// How strictly the grid is checked against the lineshape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPolicy {
    pub min_points_per_fwhm: f64,
    /// Error (true) or log a warning (false) on a too-coarse grid.
    pub strict: bool,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy {
            min_points_per_fwhm: 5.0,
            strict: true,
        }
    }
}

impl GridPolicy {
    fn check(&self, grid: &GridSpec, lineshape: &LineshapeParams) -> Result<()> {
        let per_fwhm = lineshape.fwhm_mhz / grid.step_mhz;
        if per_fwhm < self.min_points_per_fwhm {
            let msg = format!(
                "grid step {:.4} MHz gives {per_fwhm:.2} points per fwhm (minimum {})",
                grid.step_mhz, self.min_points_per_fwhm
            );
            if self.strict {
                return Err(Error::Grid(msg));
            }
            log::warn!("{msg}");
        }
        Ok(())
    }
}

/// Sampled spectrum: intensity against frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    pub frequencies_ghz: Vec<f64>,
    pub intensities: Vec<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl SpectrumGrid {
    pub fn new(frequencies_ghz: Vec<f64>, intensities: Vec<f64>) -> Result<Self> {
        let g = SpectrumGrid {
            frequencies_ghz,
            intensities,
            metadata: BTreeMap::new(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies_ghz.len() != self.intensities.len() {
            return Err(Error::Grid("frequency and intensity lengths differ".into()));
        }
        if self.frequencies_ghz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Grid("frequencies must be strictly ascending".into()));
        }
        if self.intensities.iter().chain(&self.frequencies_ghz).any(|v| !v.is_finite()) {
            return Err(Error::Grid("non-finite spectrum value".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frequencies_ghz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies_ghz.is_empty()
    }

    /// Trapezoidal area with frequency in MHz.
    pub fn area_mhz(&self) -> f64 {
        self.frequencies_ghz
            .windows(2)
            .zip(self.intensities.windows(2))
            .map(|(f, y)| 0.5 * (y[0] + y[1]) * (f[1] - f[0]) * 1e3)
            .sum()
    }

    pub fn max_intensity(&self) -> f64 {
        self.intensities.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linear interpolation; zero outside the sampled range.
    pub fn interpolate(&self, f_ghz: f64) -> f64 {
        interp_linear(&self.frequencies_ghz, &self.intensities, f_ghz)
    }

    /// Local maxima above `min_fraction` of the global maximum, refined by a
    /// parabola through the three neighbouring samples.
    pub fn peaks(&self, min_fraction: f64) -> Vec<Peak> {
        let y = &self.intensities;
        let f = &self.frequencies_ghz;
        let max = self.max_intensity();
        let mut out = Vec::new();
        for i in 1..y.len().saturating_sub(1) {
            if y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] >= min_fraction * max {
                let denom = y[i - 1] - 2.0 * y[i] + y[i + 1];
                let (shift, height) = if denom < 0.0 {
                    let d = 0.5 * (y[i - 1] - y[i + 1]) / denom;
                    (d, y[i] - 0.25 * (y[i - 1] - y[i + 1]) * d)
                } else {
                    (0.0, y[i])
                };
                let step = 0.5 * (f[i + 1] - f[i - 1]);
                out.push(Peak {
                    frequency_ghz: f[i] + shift * step,
                    height,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub frequency_ghz: f64,
    pub height: f64,
}

/// Linear interpolation on ascending `xs`; zero outside `[xs[0], xs[n-1]]`.
pub(crate) fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return 0.0;
    }
    let hi = xs.partition_point(|&v| v < x);
    if xs[hi] == x {
        return ys[hi];
    }
    let lo = hi - 1;
    let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + t * (ys[hi] - ys[lo])
}

/// Sum of unit-area profiles scaled by line amplitude.
pub fn broaden(
    lines: &[TransitionLine],
    lineshape: &LineshapeParams,
    grid: &GridSpec,
    policy: &GridPolicy,
) -> Result<SpectrumGrid> {
    lineshape.validate()?;
    grid.validate()?;
    policy.check(grid, lineshape)?;
    let freqs = grid.frequencies();
    let centers: Vec<(f64, f64)> = lines
        .iter()
        .map(|l| ((l.frequency_ghz - grid.center_ghz) * 1e3, l.amplitude))
        .collect();
    let eval = |i: usize| -> f64 {
        let x = grid.offset_mhz(i);
        centers.iter().map(|&(c, a)| a * lineshape.density(x - c)).sum()
    };
    #[cfg(feature = "parallel")]
    let intensities: Vec<f64> = {
        use rayon::prelude::*;
        (0..grid.points).into_par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let intensities: Vec<f64> = (0..grid.points).map(eval).collect();

    let mut out = SpectrumGrid::new(freqs, intensities)?;
    out.metadata.insert("profile".into(), format!("{:?}", lineshape.profile).to_lowercase());
    out.metadata.insert("fwhm_mhz".into(), lineshape.fwhm_mhz.to_string());
    Ok(out)
}

/// Precomputed transition lines for each first-shell occupancy.
#[derive(Debug, Clone)]
pub struct OdmrModel {
    pub nv: NvParameters,
    pub branch: Branch,
    /// Lines per occupancy k, amplitudes divided by the 2^k initial nuclear
    /// states so that each pattern carries unit total weight.
    patterns: [Vec<TransitionLine>; 4],
}

impl OdmrModel {
    pub fn new(nv: NvParameters, tensors: &[HyperfineTensor], branch: Branch) -> Result<Self> {
        if tensors.len() < FIRST_SHELL_SITES {
            return Err(Error::InvalidParameter(format!(
                "need {FIRST_SHELL_SITES} site tensors, got {}",
                tensors.len()
            )));
        }
        let build = |k: usize| -> Result<Vec<TransitionLine>> {
            let shell = FirstShellConfig::occupied(tensors, k)?;
            let h = build_hamiltonian(&nv, &shell)?;
            let eig = eigendecompose(&h.matrix)?;
            let norm = 1.0 / (1u32 << k) as f64;
            Ok(transition_lines(&eig, &nv, k, &TransitionOptions::default())?
                .into_iter()
                .filter(|l| l.branch == branch)
                .map(|mut l| {
                    l.amplitude *= norm;
                    l
                })
                .collect())
        };
        Ok(OdmrModel {
            nv,
            branch,
            patterns: [build(0)?, build(1)?, build(2)?, build(3)?],
        })
    }

    pub fn pattern_lines(&self, k: usize) -> &[TransitionLine] {
        &self.patterns[k]
    }

    /// Bare (k = 0) line frequency of the selected branch.
    pub fn center_ghz(&self) -> f64 {
        self.patterns[0].first().map(|l| l.frequency_ghz).unwrap_or(0.0)
    }

    /// All lines weighted by occupancy probability.
    pub fn weighted_lines(&self, p: Enrichment) -> Vec<TransitionLine> {
        let w = occupancy_weights(p);
        let mut out = Vec::new();
        for (k, lines) in self.patterns.iter().enumerate() {
            if w[k] == 0.0 {
                continue;
            }
            out.extend(lines.iter().map(|l| TransitionLine {
                amplitude: l.amplitude * w[k],
                ..*l
            }));
        }
        out
    }

    /// Smallest grid centred on the bare line that holds every line ± `margin_mhz`.
    pub fn auto_grid(&self, margin_mhz: f64, step_mhz: f64) -> Result<GridSpec> {
        let c = self.center_ghz();
        let reach = self
            .patterns
            .iter()
            .flatten()
            .map(|l| ((l.frequency_ghz - c) * 1e3).abs())
            .fold(0.0, f64::max)
            + margin_mhz;
        let half_points = (reach / step_mhz).ceil() as usize;
        Ok(GridSpec {
            center_ghz: c,
            step_mhz,
            points: 2 * half_points + 1,
        })
    }

    pub fn pattern_spectrum(
        &self,
        k: usize,
        lineshape: &LineshapeParams,
        grid: &GridSpec,
        policy: &GridPolicy,
    ) -> Result<SpectrumGrid> {
        broaden(&self.patterns[k], lineshape, grid, policy)
    }

    pub fn spectrum(
        &self,
        p: Enrichment,
        lineshape: &LineshapeParams,
        grid: &GridSpec,
        policy: &GridPolicy,
    ) -> Result<OdmrSpectrum> {
        lineshape.validate()?;
        grid.validate()?;
        let weights = occupancy_weights(p);
        let margin = 3.0 * lineshape.fwhm_mhz * 1e-3;
        for (k, lines) in self.patterns.iter().enumerate() {
            if weights[k] == 0.0 {
                continue;
            }
            if let Some(l) = lines.iter().find(|l| {
                l.frequency_ghz - margin < grid.start_ghz() || l.frequency_ghz + margin > grid.stop_ghz()
            }) {
                return Err(Error::Grid(format!(
                    "line at {:.6} GHz (k={k}) is within 3 fwhm of the grid edge or outside it",
                    l.frequency_ghz
                )));
            }
        }
        policy.check(grid, lineshape)?;
        let pattern_spectra: Vec<SpectrumGrid> = (0..4)
            .map(|k| self.pattern_spectrum(k, lineshape, grid, policy))
            .collect::<Result<_>>()?;
        let mut intensities = vec![0.0; grid.points];
        for (k, s) in pattern_spectra.iter().enumerate() {
            for (acc, v) in intensities.iter_mut().zip(&s.intensities) {
                *acc += weights[k] * v;
            }
        }
        let mut grid_out = SpectrumGrid::new(grid.frequencies(), intensities)?;
        grid_out.metadata = pattern_spectra[0].metadata.clone();
        grid_out.metadata.insert("enrichment".into(), p.value().to_string());
        grid_out.metadata.insert(
            "occupancy_weights".into(),
            format!("[{},{},{},{}]", weights[0], weights[1], weights[2], weights[3]),
        );
        grid_out.metadata.insert("field_t".into(), self.nv.field_t.to_string());
        grid_out
            .metadata
            .insert("branch".into(), match self.branch {
                Branch::Plus => "0->+1".into(),
                Branch::Minus => "0->-1".into(),
            });
        Ok(OdmrSpectrum {
            grid: grid_out,
            weights,
            lines: self.weighted_lines(p),
        })
    }
}

/// Composite spectrum together with the weighted line list it was built from.
#[derive(Debug, Clone)]
pub struct OdmrSpectrum {
    pub grid: SpectrumGrid,
    pub weights: [f64; 4],
    pub lines: Vec<TransitionLine>,
}

impl OdmrSpectrum {
    pub fn total_line_weight(&self) -> f64 {
        self.lines.iter().map(|l| l.amplitude).sum()
    }

    /// Line weight within `window_mhz` of `f_ghz`.
    pub fn line_weight_near(&self, f_ghz: f64, window_mhz: f64) -> f64 {
        self.lines
            .iter()
            .filter(|l| ((l.frequency_ghz - f_ghz) * 1e3).abs() <= window_mhz)
            .map(|l| l.amplitude)
            .sum()
    }
}

/// One-shot synthesis: build the occupancy patterns and combine them.
pub fn synthesize_odmr(
    p: Enrichment,
    nv: &NvParameters,
    tensors: &[HyperfineTensor],
    lineshape: &LineshapeParams,
    grid: &GridSpec,
    policy: &GridPolicy,
) -> Result<OdmrSpectrum> {
    OdmrModel::new(*nv, tensors, Branch::Plus)?.spectrum(p, lineshape, grid, policy)
}
