//! Ground-state spin model of an NV⁻ centre with up to three first-shell ¹³C
//! nuclei.
//!
//! Units: frequencies in GHz for the electron part, MHz for hyperfine and
//! nuclear gyromagnetic constants, field in tesla. The Hamiltonian is
//! assembled in GHz.

mod eigen;
mod hamiltonian;
mod transitions;

pub use eigen::{eigendecompose, Eigensystem};
pub use hamiltonian::{build_hamiltonian, BasisLabel, HamiltonianMatrix};
pub use transitions::{transition_lines, Branch, TransitionLine, TransitionOptions};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of first-shell carbon sites around the vacancy.
pub const FIRST_SHELL_SITES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NvParameters {
    /// Zero-field splitting D (GHz).
    pub zero_field_splitting_ghz: f64,
    /// Electron gyromagnetic ratio (GHz/T).
    pub gamma_e_ghz_per_t: f64,
    /// ¹³C gyromagnetic ratio (MHz/T).
    pub gamma_n_mhz_per_t: f64,
    pub field_t: f64,
    /// Angle between the field and the NV axis (rad).
    #[serde(default)]
    pub theta_rad: f64,
}

impl Default for NvParameters {
    fn default() -> Self {
        NvParameters {
            zero_field_splitting_ghz: 2.870,
            gamma_e_ghz_per_t: 28.025,
            gamma_n_mhz_per_t: 10.708,
            field_t: 0.472,
            theta_rad: 0.0,
        }
    }
}

impl NvParameters {
    pub fn with_field(mut self, field_t: f64) -> Self {
        self.field_t = field_t;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.zero_field_splitting_ghz > 0.0) {
            return bad("zero-field splitting must be positive");
        }
        if !(self.gamma_e_ghz_per_t > 0.0) {
            return bad("electron gyromagnetic ratio must be positive");
        }
        if !(self.gamma_n_mhz_per_t > 0.0) {
            return bad("nuclear gyromagnetic ratio must be positive");
        }
        if !(self.field_t >= 0.0) || !self.field_t.is_finite() {
            return bad("field must be finite and non-negative");
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.theta_rad) {
            return bad("theta must lie in [0, pi]");
        }
        Ok(())
    }

    /// ¹³C Larmor frequency γn·B (MHz).
    pub fn nuclear_larmor_mhz(&self) -> f64 {
        self.gamma_n_mhz_per_t * self.field_t
    }

    /// Bare 0 → +1 and 0 → −1 transition frequencies at theta = 0 (GHz).
    pub fn aligned_transitions_ghz(&self) -> (f64, f64) {
        let z = self.gamma_e_ghz_per_t * self.field_t;
        let d = self.zero_field_splitting_ghz;
        (d + z, (d - z).abs())
    }
}

/// Hyperfine tensor in the NV frame (MHz). Symmetric by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "[[f64; 3]; 3]")]
pub struct HyperfineTensor(Matrix3<f64>);

impl HyperfineTensor {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "hyperfine tensor has non-finite entries".into(),
            ));
        }
        let asym = (m - m.transpose()).abs().max();
        if asym != 0.0 {
            return Err(Error::InvalidTensor(asym));
        }
        Ok(HyperfineTensor(m))
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(Matrix3::from_fn(|i, j| rows[i][j]))
    }

    /// Pure `A_zz Sz Iz` coupling.
    pub fn secular(a_zz_mhz: f64) -> Self {
        HyperfineTensor(Matrix3::from_diagonal(&Vector3::new(0.0, 0.0, a_zz_mhz)))
    }

    /// Axially symmetric tensor `A⊥·1 + (A∥ − A⊥)·n nᵀ` about the unit axis `n`.
    pub fn axial(a_par_mhz: f64, a_perp_mhz: f64, axis: Vector3<f64>) -> Result<Self> {
        let norm = axis.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("tensor axis must be non-zero".into()));
        }
        let n = axis / norm;
        let mut m = Matrix3::identity() * a_perp_mhz;
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] += (a_par_mhz - a_perp_mhz) * (n[i] * n[j]);
            }
        }
        Self::new(m)
    }

    /// Axial tensor for first-shell site `site` (0..3): unique axis along the
    /// vacancy–carbon bond, tilted `arccos(-1/3)` from the NV axis, azimuths
    /// spaced by 120°.
    pub fn first_shell_site(a_par_mhz: f64, a_perp_mhz: f64, site: usize) -> Result<Self> {
        let cos_b = -1.0_f64 / 3.0;
        let sin_b = (1.0 - cos_b * cos_b).sqrt();
        let phi = 2.0 * std::f64::consts::PI * (site % FIRST_SHELL_SITES) as f64 / 3.0;
        Self::axial(
            a_par_mhz,
            a_perp_mhz,
            Vector3::new(sin_b * phi.cos(), sin_b * phi.sin(), cos_b),
        )
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }
}

impl From<HyperfineTensor> for [[f64; 3]; 3] {
    fn from(t: HyperfineTensor) -> Self {
        let m = t.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }
}

impl<'de> Deserialize<'de> for HyperfineTensor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        HyperfineTensor::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Occupied first-shell sites, each with its own tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FirstShellConfig {
    sites: Vec<HyperfineTensor>,
}

impl FirstShellConfig {
    pub fn new(sites: Vec<HyperfineTensor>) -> Result<Self> {
        if sites.len() > FIRST_SHELL_SITES {
            return Err(Error::Capacity(sites.len()));
        }
        Ok(FirstShellConfig { sites })
    }

    pub fn empty() -> Self {
        FirstShellConfig { sites: Vec::new() }
    }

    /// First `k` of the given site tensors.
    pub fn occupied(tensors: &[HyperfineTensor], k: usize) -> Result<Self> {
        if k > FIRST_SHELL_SITES {
            return Err(Error::Capacity(k));
        }
        if k > tensors.len() {
            return Err(Error::InvalidParameter(format!(
                "{k} sites requested but only {} tensors configured",
                tensors.len()
            )));
        }
        Self::new(tensors[..k].to_vec())
    }

    pub fn occupancy(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[HyperfineTensor] {
        &self.sites
    }
}
