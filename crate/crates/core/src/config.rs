//! JSON run configuration: NV constants, first-shell tensors, lineshape,
//! thermal convention, timeline defaults and the sample registry.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dnp::{dnp_spectrum, thermal_polarization, DnpSpectrum, PolarizationConvention, SampleParams};
use crate::error::{Error, Result};
use crate::plan::CompileDefaults;
use crate::spectra::{Enrichment, GridPolicy, LineshapeParams, OdmrModel, OdmrSpectrum};
use crate::spin::{Branch, HyperfineTensor, NvParameters, FIRST_SHELL_SITES};

/// Grid margin beyond the outermost line (MHz) and step (MHz) for
/// automatically sized spectra.
pub const AUTO_MARGIN_MHZ: f64 = 60.0;
pub const AUTO_STEP_MHZ: f64 = 0.25;

/// Environment variable naming a config file that replaces the bundled one.
pub const CONFIG_ENV: &str = "NVDNP_CONFIG";

const BUNDLED: &str = include_str!("../../../config/default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperfineConfig {
    pub a_par_mhz: f64,
    pub a_perp_mhz: f64,
    /// Full tensors (MHz, NV frame) replacing the axial default for a site,
    /// keyed by site index "0".."2".
    #[serde(default)]
    pub site_overrides: BTreeMap<String, [[f64; 3]; 3]>,
}

impl HyperfineConfig {
    pub fn tensors(&self) -> Result<Vec<HyperfineTensor>> {
        for key in self.site_overrides.keys() {
            match key.parse::<usize>() {
                Ok(i) if i < FIRST_SHELL_SITES => {}
                _ => return Err(Error::Config(format!("unknown hyperfine site '{key}'"))),
            }
        }
        (0..FIRST_SHELL_SITES)
            .map(|i| match self.site_overrides.get(&i.to_string()) {
                Some(rows) => HyperfineTensor::from_rows(*rows),
                None => HyperfineTensor::first_shell_site(self.a_par_mhz, self.a_perp_mhz, i),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalConfig {
    pub temperature_k: f64,
    #[serde(default)]
    pub convention: PolarizationConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub nv: NvParameters,
    pub hyperfine: HyperfineConfig,
    #[serde(default)]
    pub lineshape: LineshapeParams,
    pub thermal: ThermalConfig,
    #[serde(default)]
    pub compile: CompileDefaults,
    #[serde(default)]
    pub samples: Vec<SampleParams>,
}

impl Config {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled configuration is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Explicit path, else `NVDNP_CONFIG`, else the bundled defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::from_path(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::from_path(Path::new(&p)),
                _ => Ok(Self::bundled()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.nv.validate()?;
        self.lineshape.validate()?;
        self.hyperfine.tensors()?;
        if !(self.thermal.temperature_k > 0.0) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        if !(self.compile.saturation_spacing_s > 0.0) || !(self.compile.pulse_length_s >= 0.0) {
            return Err(Error::Config("invalid timeline defaults".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.samples {
            if !seen.insert(s.label.as_str()) {
                return Err(Error::Config(format!("duplicate sample '{}'", s.label)));
            }
            if !(0.0..=1.0).contains(&s.enrichment) || !(s.t_dnp_s > 0.0) || !(s.t1n_s > 0.0) {
                return Err(Error::Config(format!("sample '{}' has out-of-range values", s.label)));
            }
        }
        Ok(())
    }

    pub fn tensors(&self) -> Result<Vec<HyperfineTensor>> {
        self.hyperfine.tensors()
    }

    pub fn odmr_model(&self, branch: Branch) -> Result<OdmrModel> {
        OdmrModel::new(self.nv, &self.tensors()?, branch)
    }

    /// ODMR spectrum at enrichment `p` on an automatically sized grid.
    pub fn odmr(&self, p: f64, branch: Branch, step_mhz: f64) -> Result<OdmrSpectrum> {
        let model = self.odmr_model(branch)?;
        let grid = model.auto_grid(AUTO_MARGIN_MHZ, step_mhz)?;
        model.spectrum(Enrichment::new(p)?, &self.lineshape, &grid, &GridPolicy::default())
    }

    /// DNP spectrum at enrichment `p`; `nu_n_mhz` defaults to the ¹³C Larmor
    /// frequency at the configured field.
    pub fn dnp(&self, p: f64, branch: Branch, nu_n_mhz: Option<f64>) -> Result<DnpSpectrum> {
        let odmr = self.odmr(p, branch, AUTO_STEP_MHZ)?;
        dnp_spectrum(&odmr.grid, nu_n_mhz.unwrap_or_else(|| self.nv.nuclear_larmor_mhz()), 1.0)
    }

    pub fn sample(&self, label: &str) -> Result<&SampleParams> {
        self.samples
            .iter()
            .find(|s| s.label.eq_ignore_ascii_case(label))
            .ok_or_else(|| Error::Config(format!("no sample labelled '{label}'")))
    }

    /// Thermal ¹³C polarization at `field_t` with the configured convention.
    pub fn thermal_polarization(&self, field_t: f64) -> Result<f64> {
        thermal_polarization(
            field_t,
            self.thermal.temperature_k,
            self.nv.gamma_n_mhz_per_t,
            self.thermal.convention,
        )
    }
}
