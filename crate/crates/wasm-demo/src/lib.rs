//! Browser bindings. Each export returns a flat `[x0, y0, x1, y1, ...]`
//! array so the page can plot it without extra decoding.

use nvdnp::config::Config;
use nvdnp::dnp::simulate_buildup;
use nvdnp::spectra::Profile;
use nvdnp::spin::Branch;
use wasm_bindgen::prelude::*;

fn interleave(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).flat_map(|(a, b)| [*a, *b]).collect()
}

fn config(fwhm_mhz: f64, gaussian: bool) -> Config {
    let mut c = Config::bundled();
    c.lineshape.fwhm_mhz = fwhm_mhz;
    c.lineshape.profile = if gaussian { Profile::Gaussian } else { Profile::Lorentzian };
    c
}

/// ODMR intensity against frequency (GHz) on the 0 → +1 branch.
pub fn odmr_points(p: f64, fwhm_mhz: f64, gaussian: bool) -> Result<Vec<f64>, String> {
    let s = config(fwhm_mhz, gaussian)
        .odmr(p, Branch::Plus, (fwhm_mhz / 8.0).min(0.25))
        .map_err(|e| e.to_string())?;
    Ok(interleave(&s.grid.frequencies_ghz, &s.grid.intensities))
}

/// DNP response normalized to max |S| = 1.
pub fn dnp_points(p: f64, fwhm_mhz: f64, nu_n_mhz: f64) -> Result<Vec<f64>, String> {
    let d = config(fwhm_mhz, false)
        .dnp(p, Branch::Plus, Some(nu_n_mhz))
        .map_err(|e| e.to_string())?;
    let m = d.max_abs();
    let y: Vec<f64> = d.signal.iter().map(|v| if m > 0.0 { v / m } else { 0.0 }).collect();
    Ok(interleave(&d.mw_frequencies_ghz, &y))
}

/// Noiseless buildup of a registry sample in percent polarization.
pub fn buildup_points(label: &str, t_end_s: f64, n: usize) -> Result<Vec<f64>, String> {
    let c = Config::bundled();
    let s = c.sample(label).map_err(|e| e.to_string())?;
    let p_max = s.enhancement * c.thermal_polarization(s.field_t).map_err(|e| e.to_string())?;
    if n < 2 || !(t_end_s > 0.0) {
        return Err("need at least 2 points and a positive end time".into());
    }
    let t: Vec<f64> = (0..n).map(|i| t_end_s * i as f64 / (n - 1) as f64).collect();
    let curve = simulate_buildup(s.t_dnp_s, p_max * 100.0, &t, 0.0, 0).map_err(|e| e.to_string())?;
    Ok(interleave(&curve.times_s, &curve.polarization))
}

pub fn sample_labels() -> Vec<String> {
    Config::bundled().samples.into_iter().map(|s| s.label).collect()
}

#[wasm_bindgen]
pub fn odmr(p: f64, fwhm_mhz: f64, gaussian: bool) -> Result<Vec<f64>, JsError> {
    odmr_points(p, fwhm_mhz, gaussian).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn dnp(p: f64, fwhm_mhz: f64, nu_n_mhz: f64) -> Result<Vec<f64>, JsError> {
    dnp_points(p, fwhm_mhz, nu_n_mhz).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn buildup(label: &str, t_end_s: f64, n: usize) -> Result<Vec<f64>, JsError> {
    buildup_points(label, t_end_s, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn samples() -> Vec<String> {
    sample_labels()
}

#[wasm_bindgen]
pub fn larmor_mhz() -> f64 {
    Config::bundled().nv.nuclear_larmor_mhz()
}
