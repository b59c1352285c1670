//! Acceptance criteria 1-10. Each test writes one `criterion N: PASS|FAIL`
//! line to stdout (bypassing the harness capture) and then asserts.

mod common;

use std::io::Write;

use nalgebra::DMatrix;
use nvdnp::config::Config;
use nvdnp::dnp::{
    dnp_spectrum, fit_buildup, recovery_correction_factor, recovery_time_for_factor, simulate_buildup,
    thermal_polarization, BaselineMode, PolarizationConvention,
};
use nvdnp::plan::{compile_timeline, execute_plan, parse_plan, sweep_frequencies, PhysicsConfig};
use nvdnp::seed::derive_seed;
use nvdnp::signal::{
    bootstrap_amplitude, enhancement_with_ci, fit_biexponential, fit_scaling_factor, fit_t1_small_flip,
    simulate_small_flip, synthesize_fid, BiexpOptions, BootstrapResult, CiMode, DatasetStore, DecayModel,
    ScaleChannel,
};
use nvdnp::spectra::{occupancy_weights, Enrichment, GridPolicy, LineshapeParams, OdmrModel};
use nvdnp::spin::{eigendecompose, Branch, HyperfineTensor, NvParameters};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use common::*;

fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {n:>2}: {verdict}  {detail}").unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

fn linspace(end: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| end * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn criterion_01_transition_frequencies() {
    let nv = NvParameters::default();
    let (plus_f, minus_f) = nv.aligned_transitions_ghz();
    let exact = lines_for(&nv, &[]);
    let diag = |b: Branch| exact.iter().find(|l| l.branch == b).unwrap().frequency_ghz;
    let (dp, dm) = (diag(Branch::Plus), diag(Branch::Minus));
    let pass = (plus_f - 16.10).abs() <= 0.05
        && (minus_f - 10.36).abs() <= 0.05
        && (dp - plus_f).abs() < 1e-9
        && (dm - minus_f).abs() < 1e-9;
    report(1, pass, &format!("0->+1 {dp:.4} GHz, 0->-1 {dm:.4} GHz"));
}

#[test]
fn criterion_02_quartet_and_natural_abundance() {
    let nv = NvParameters::default();
    let ls = LineshapeParams::default();
    let pol = GridPolicy::default();
    let quartet = OdmrModel::new(nv, &[HyperfineTensor::secular(130.0); 3], Branch::Plus).unwrap();
    let g = quartet.auto_grid(60.0, 0.25).unwrap();
    let s = quartet.spectrum(Enrichment::new(1.0).unwrap(), &ls, &g, &pol).unwrap();
    let peaks = s.grid.peaks(0.05);
    let unit = peaks.iter().map(|p| p.height).sum::<f64>() / 8.0;
    let ratios: Vec<f64> = peaks.iter().map(|p| p.height / unit).collect();
    let ratio_ok = peaks.len() == 4
        && ratios.iter().zip([1.0, 3.0, 3.0, 1.0]).all(|(r, want)| (r / want - 1.0).abs() <= 0.02);

    let shell: Vec<_> = (0..3).map(|i| HyperfineTensor::first_shell_site(199.7, 120.3, i).unwrap()).collect();
    let model = OdmrModel::new(nv, &shell, Branch::Plus).unwrap();
    let g = model.auto_grid(60.0, 0.25).unwrap();
    let na = model.spectrum(Enrichment::new(0.011).unwrap(), &ls, &g, &pol).unwrap();
    let central = na.line_weight_near(model.center_ghz(), 1.0) / na.total_line_weight();
    report(
        2,
        ratio_ok && central >= 0.967,
        &format!("p=1 peaks {} ratios {ratios:.3?}; p=0.011 central share {central:.4}", peaks.len()),
    );
}

#[test]
fn criterion_03_dnp_antisymmetry() {
    let nv = NvParameters::default();
    let nu = nv.nuclear_larmor_mhz();
    let model = OdmrModel::new(nv, &[HyperfineTensor::secular(130.0); 3], Branch::Plus).unwrap();
    let g = model.auto_grid(80.0, 0.1).unwrap();
    let mut worst: f64 = 0.0;
    let mut pairs_ok = true;
    for p in [0.0, 0.011, 0.3, 1.0] {
        let odmr = model
            .spectrum(Enrichment::new(p).unwrap(), &LineshapeParams::default(), &g, &GridPolicy::default())
            .unwrap();
        let s = dnp_spectrum(&odmr.grid, nu, 1.0).unwrap();
        worst = worst.max(s.antisymmetry_residual().unwrap() / s.max_abs());
        if p > 0.0 {
            let c = model.center_ghz();
            let w = occupancy_weights(Enrichment::new(p).unwrap());
            // Outer satellites exist only for k = 3; skip them when buried in neighbouring tails.
            let offsets: &[f64] = if w[3] >= 0.01 { &[65.0, 195.0] } else { &[65.0] };
            for &off in offsets {
                let (hi, lo) = (s.interpolate(c + (off + nu) * 1e-3), s.interpolate(c + (off - nu) * 1e-3));
                let (mhi, mlo) = (s.interpolate(c - (off - nu) * 1e-3), s.interpolate(c - (off + nu) * 1e-3));
                let tol = 1e-9 * s.max_abs();
                pairs_ok &= hi > 0.0 && lo < 0.0 && (hi + mlo).abs() < tol && (lo + mhi).abs() < tol;
            }
        }
    }
    report(3, worst < 1e-9 && pairs_ok, &format!("max |S(f0+d)+S(f0-d)|/max|S| = {worst:.2e}, satellite sign pairs {pairs_ok}"));
}

#[test]
fn criterion_04_printed_polarization_consistency() {
    let cfg = Config::bundled();
    let p_th = thermal_polarization(0.472, 300.0, cfg.nv.gamma_n_mhz_per_t, PolarizationConvention::HighTemperatureNoHalf)
        .unwrap();
    let mut rows = Vec::new();
    let mut pass = true;
    for s in &cfg.samples {
        let printed = s.printed_p_enh_percent.unwrap();
        let computed = s.enhancement * p_th * 100.0;
        let ok = (printed.round(computed) - printed.value).abs() <= printed.unit() * (1.0 + 1e-9);
        pass &= ok;
        rows.push(format!("{} {:.5}% vs {}%{}", s.label, computed, printed.value, if ok { "" } else { " (off)" }));
    }
    report(4, pass, &format!("P_th {p_th:.4e}; {}", rows.join(", ")));
}

/// Not a criterion: at 293 K the same conversion reproduces every printed row.
#[test]
fn printed_polarization_rows_agree_at_293_k() {
    let cfg = Config::bundled();
    let p_th = thermal_polarization(0.472, 293.0, cfg.nv.gamma_n_mhz_per_t, PolarizationConvention::HighTemperatureNoHalf)
        .unwrap();
    for s in &cfg.samples {
        let printed = s.printed_p_enh_percent.unwrap();
        let computed = s.enhancement * p_th * 100.0;
        assert!((printed.round(computed) - printed.value).abs() <= printed.unit() * (1.0 + 1e-9), "{}", s.label);
    }
}

#[test]
fn criterion_05_fit_round_trips() {
    let cfg = Config::bundled();
    let mut notes = Vec::new();
    let mut pass = true;
    for s in &cfg.samples {
        let t = linspace(5.0 * s.t_dnp_s, 60);
        let c = simulate_buildup(s.t_dnp_s, 1e-3, &t, 0.0, 0).unwrap();
        let f = fit_buildup(&c, BaselineMode::Fixed).unwrap();
        pass &= (f.t_dnp_s.value / s.t_dnp_s - 1.0).abs() < 1e-3;
    }
    let trials = 2000;
    for s in &cfg.samples {
        let [a_ms, b_ms] = s.t2_pair_ms.unwrap();
        let (t1, t2) = (a_ms * 1e-3, b_ms * 1e-3);
        let t = biexp_grid(t2, 400);
        let clean = biexp_values(&t, 0.5, t1, 0.5, t2);
        let f = fit_biexponential(&t, &clean, &BiexpOptions::default()).unwrap();
        let exact = (f.t2_1_s.value / t1 - 1.0).abs() < 1e-3 && (f.t2_2_s.value / t2 - 1.0).abs() < 1e-3;
        let hits: (usize, usize) = (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(5, &s.label, i));
                let noise = Normal::new(0.0, 0.01).unwrap();
                let y: Vec<f64> = clean.iter().map(|v| v + noise.sample(&mut rng)).collect();
                let f = fit_biexponential(&t, &y, &BiexpOptions::default()).unwrap();
                (f.t2_1_s.contains(t1) as usize, f.t2_2_s.contains(t2) as usize)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        let (r1, r2) = (hits.0 as f64 / trials as f64, hits.1 as f64 / trials as f64);
        pass &= exact && r1 >= 0.93 && r2 >= 0.93;
        notes.push(format!("{} {:.3}/{:.3}", s.label, r1, r2));
    }
    report(5, pass, &format!("buildup and T2 pairs exact to 0.1%; T2 CI coverage {}", notes.join(", ")));
}

#[test]
fn criterion_06_small_flip_t1() {
    let th = 10.12_f64.to_radians();
    let series = simulate_small_flip(13.08, th, 1.0, 60, 0.0, 0).unwrap();
    let f = fit_t1_small_flip(&series, th, 1.0).unwrap();
    let observed = f.observed_s.value;
    let pass = (observed - 10.85).abs() <= 0.02 && (f.t1_s.value / 13.08 - 1.0).abs() < 1e-3;
    report(6, pass, &format!("observed {observed:.4} s, corrected {:.4} s", f.t1_s.value));
}

#[test]
fn criterion_07_bootstrap_engine() {
    let sigma0 = 0.2;
    let mut notes = Vec::new();
    let mut pass = true;
    for (n, seed) in [(400usize, 1u64), (1000, 2)] {
        let store = gaussian_store(n, sigma0, seed);
        let r = bootstrap_amplitude(&store, first_point, 10_000, 7).unwrap();
        let rel = r.sigma / (sigma0 / (n as f64).sqrt());
        pass &= (rel - 1.0).abs() < 0.1;
        notes.push(format!("N={n} sigma ratio {rel:.3}"));
    }

    let store = gaussian_store(12, 0.1, 4);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bootstrap_amplitude(&store, first_point, 10_000, 7).unwrap())
    };
    let a = run(1);
    let deterministic = a == run(1) && a == run(4) && a == run(3);
    pass &= deterministic;

    // Weak thermal signal: blocks fitted against a hyperpolarized reference.
    let c = 1.758;
    let a_th = 1.0 / (1264.0 * c);
    let decay = DecayModel::Exponential { t2_s: 50e-6 };
    let hp = synthesize_fid(1.0, decay, 0.0, 0.0, 0, 256, 1e-6).unwrap();
    let energy: f64 = hp.real().iter().map(|v| v * v).sum();
    let blocks = 16;
    let sigma = 0.2 * a_th * (blocks as f64 * energy).sqrt();
    let recs = (0..blocks)
        .map(|i| synthesize_fid(a_th, decay, 0.0, sigma, derive_seed(3, "block", i), 256, 1e-6).unwrap())
        .collect();
    let store = DatasetStore::new(recs).unwrap();
    let amp = |r: &nvdnp::signal::FidRecord| Ok(fit_scaling_factor(r, &hp, ScaleChannel::Real)?.scale.value);
    let boot = bootstrap_amplitude(&store, amp, 10_000, 7).unwrap();
    let e = enhancement_with_ci(1.0, &boot, c, CiMode::Auto).unwrap();
    let d1_shape = !e.symmetric && e.lower < e.enhancement && e.enhancement < e.upper;
    // The printed bounds are the reciprocal image of a +-48 % thermal interval.
    let printed = BootstrapResult {
        mean: 1.0,
        sigma: 0.48 / 1.96,
        n_resamples: 10_000,
        n_blocks: 16,
        ci_low: 0.52,
        ci_high: 1.48,
        distribution: None,
        warnings: vec![],
    };
    let p = enhancement_with_ci(1264.0 * c, &printed, c, CiMode::Auto).unwrap();
    pass &= d1_shape && !p.symmetric && p.lower < p.enhancement && p.enhancement < p.upper;
    report(
        7,
        pass,
        &format!(
            "{}; deterministic/thread-invariant {deterministic}; weak-signal eps {:.0} in [{:.0}, {:.0}]; printed-shape [{:.0}, {:.0}]",
            notes.join(", "),
            e.enhancement,
            e.lower,
            e.upper,
            p.lower,
            p.upper
        ),
    );
}

#[test]
fn criterion_08_correction_factor() {
    let base = recovery_correction_factor(1.0, 1.0).unwrap();
    let cfg = Config::bundled();
    let mut worst: f64 = 0.0;
    for s in &cfg.samples {
        let f = s.correction_factor.unwrap();
        let t_rec = recovery_time_for_factor(f, s.t1n_s).unwrap();
        worst = worst.max((recovery_correction_factor(t_rec, s.t1n_s).unwrap() - f).abs());
    }
    report(
        8,
        (base - 1.582).abs() <= 1e-3 && worst < 1e-12,
        &format!("factor(T1, T1) = {base:.5}; printed factors round-trip within {worst:.1e}"),
    );
}

#[test]
fn criterion_09_end_to_end_protocol() {
    let cfg = Config::bundled();
    let sample = cfg.sample("D1").unwrap().clone();
    let profile = cfg.dnp(sample.enrichment, Branch::Plus, None).unwrap();
    let physics = PhysicsConfig::for_sample(&sample, profile, cfg.thermal_polarization(sample.field_t).unwrap());
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../plans/cw_dnp.plan")).unwrap();
    let timeline = compile_timeline(&parse_plan(&text).unwrap(), &cfg.compile).unwrap();

    let spec = &physics.pump_profile;
    let freqs: Vec<f64> = spec.mw_frequencies_ghz.iter().step_by(4).copied().collect();
    let runs = sweep_frequencies(&timeline, &sample, &physics, &freqs, 11).unwrap();
    let amps: Vec<f64> = runs.iter().map(|r| r.acquisitions[0].amplitude).collect();
    let a_max = amps.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = freqs
        .iter()
        .zip(&amps)
        .map(|(f, a)| (a / a_max - spec.interpolate(*f) / spec.max_abs()).abs())
        .fold(0.0, f64::max);

    let i_peak = spec.signal.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    let f_peak = spec.mw_frequencies_ghz[i_peak];
    let plan = format!(
        "laser on\nmw on {f_peak}GHz\nsaturate 8\nwait {}s\npulse 90 x\nacquire 32 0.5us\n",
        4.0 * sample.t_dnp_s
    );
    let t = compile_timeline(&parse_plan(&plan).unwrap(), &cfg.compile).unwrap();
    let run = execute_plan(&t, &sample, &physics, 0).unwrap();
    let frac = run.acquisitions[0].amplitude / physics.pump_target(f_peak);
    let target = 1.0 - (-4.0f64).exp();
    report(
        9,
        worst < 0.01 && (frac - target).abs() < 1e-4,
        &format!("sweep vs spectrum worst {worst:.2e}; 4 T_DNP fraction {frac:.6} (want {target:.6})"),
    );
}

#[test]
fn criterion_10_oracle_equivalence() {
    let nv = NvParameters::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_line: f64 = 0.0;
    for trial in 0..60 {
        let k = 1 + trial % 2;
        let ts: Vec<_> = (0..k).map(|_| HyperfineTensor::secular(rng.random_range(100.0..200.0))).collect();
        let exact = plus(&lines_for(&nv, &ts));
        let oracle = perturbative_plus_lines(&nv, &ts);
        worst_line = worst_line.max(worst_relative_offset(&exact, &oracle, 0.02));
    }
    let mut worst_resid: f64 = 0.0;
    for trial in 0..100 {
        let n = 1 + trial % 24;
        let h = random_hermitian(n, &mut rng);
        let e = eigendecompose(&h).unwrap();
        let r: DMatrix<f64> = (e.reconstruct() - &h).map(|z| z.norm());
        worst_resid = worst_resid.max(r.max());
    }
    report(
        10,
        worst_line < 0.01 && worst_resid < 1e-10,
        &format!("line offset {worst_line:.2e} of splitting; reconstruction residual {worst_resid:.2e}"),
    );
}
