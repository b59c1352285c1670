use std::path::{Path, PathBuf};

use serde::Serialize;

use nvdnp::config::Config;
use nvdnp::dnp::{fit_buildup, simulate_buildup, BaselineMode, DnpSpectrum, SampleParams};
use nvdnp::io::{self, Manifest, Table};
use nvdnp::plan::{compile_timeline, execute_plan, parse_plan, sweep_frequencies, Execution, PhysicsConfig};
use nvdnp::seed::derive_seed;
use nvdnp::signal::{
    bootstrap_amplitude, enhancement_with_ci, fit_biexponential, fit_scaling_factor, fit_t1_small_flip,
    simulate_small_flip, synthesize_echo_train, synthesize_fid, BiexpOptions, CiMode, DatasetStore, DecayModel,
    EchoParams, ScaleChannel,
};
use nvdnp::spectra::GridSpec;
use nvdnp::spin::Branch;
use nvdnp::Error;

use crate::{BootstrapArgs, CiArg, Cli, Command, DnpSweepArgs, FitCommand, OdmrArgs, SimulateArgs, SynthCommand, TensorArgs};

/// Exit status plus message.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_numerical() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 2, message: e.to_string() }
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn input_error(msg: impl Into<String>) -> Failure {
    Failure { code: 2, message: msg.into() }
}

pub fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| input_error(format!("cannot set thread count: {e}")))?;
    }
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Odmr(a) => odmr(cfg, a),
        Command::DnpSweep(a) => dnp_sweep(cfg, a),
        Command::Fit { what } => fit(what),
        Command::Bootstrap(a) => bootstrap(&cfg, a),
        Command::Simulate(a) => simulate(&cfg, a),
        Command::Synth { what } => synth(&cfg, what),
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r?,
            }
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| input_error(e.to_string()))? + "\n";
    emit(out, &text)
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn apply_tensors(cfg: &mut Config, t: &TensorArgs) -> CliResult {
    if let Some(a) = t.secular_mhz {
        for site in 0..3 {
            cfg.hyperfine
                .site_overrides
                .insert(site.to_string(), [[0.0; 3], [0.0; 3], [0.0, 0.0, a]]);
        }
        cfg.validate()?;
    }
    Ok(())
}

fn odmr(mut cfg: Config, a: OdmrArgs) -> CliResult {
    apply_tensors(&mut cfg, &a.tensors)?;
    if a.p.len() > 1 && a.out_dir.is_none() {
        return Err(input_error("several --p values need --out-dir"));
    }
    if let Some(d) = &a.out_dir {
        std::fs::create_dir_all(d)?;
    }
    for &p in &a.p {
        let s = cfg.odmr(p, a.branch.into(), a.step_mhz)?;
        let text = io::spectrum_table(&s.grid).to_csv_string()?;
        let path = a.out_dir.as_ref().map(|d| d.join(format!("odmr_p{p}.csv")));
        emit(path.as_deref(), &text)?;
    }
    Ok(())
}

fn resample(d: &DnpSpectrum, center_ghz: f64, span_mhz: f64, points: usize) -> CliResult<DnpSpectrum> {
    let g = GridSpec::centered(center_ghz, span_mhz, points)?;
    let f = g.frequencies();
    let s = f.iter().map(|&x| d.interpolate(x)).collect();
    Ok(DnpSpectrum::new(f, s)?)
}

fn dnp_sweep(mut cfg: Config, a: DnpSweepArgs) -> CliResult {
    apply_tensors(&mut cfg, &a.tensors)?;
    let p = match (&a.sample, a.p) {
        (Some(label), _) => cfg.sample(label)?.enrichment,
        (None, Some(p)) => p,
        (None, None) => unreachable!("clap requires one source"),
    };
    let branch: Branch = a.branch.into();
    let mut d = cfg.dnp(p, branch, a.nu_n)?;
    if let (Some(span), Some(n)) = (a.span_mhz, a.points) {
        let c = cfg.odmr_model(branch)?.center_ghz();
        d = resample(&d, c, span, n)?;
    }
    let peak = d.max_abs();
    if a.normalize && peak > 0.0 {
        d.signal.iter_mut().for_each(|v| *v /= peak);
    }
    let mut table = io::dnp_table(&d).with_meta("enrichment", p).with_meta(
        "nu_n_mhz",
        a.nu_n.unwrap_or_else(|| cfg.nv.nuclear_larmor_mhz()),
    );
    if let Some(l) = &a.sample {
        table = table.with_meta("sample", l);
    }
    emit(a.out.as_deref(), &table.to_csv_string()?)?;
    if a.verify {
        let r = d
            .antisymmetry_residual()
            .ok_or_else(|| input_error("--verify needs an odd number of grid points"))?;
        let rel = if d.max_abs() > 0.0 { r / d.max_abs() } else { 0.0 };
        eprintln!("antisymmetry residual: {rel:e} of max |S|");
        if rel >= 1e-9 {
            return Err(Failure { code: 3, message: format!("spectrum is not antisymmetric ({rel:e})") });
        }
    }
    Ok(())
}

fn read_table(path: &Path) -> CliResult<Table> {
    let t = Table::read(path).map_err(|e| Failure::from(prefix(e, path)))?;
    if t.rows.is_empty() {
        return Err(input_error(format!("{}: no data rows", path.display())));
    }
    Ok(t)
}

fn prefix(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { row, message } => Error::Format { row, message: format!("{}: {message}", path.display()) },
        other => other,
    }
}

#[derive(Serialize)]
struct FitReport<T: Serialize> {
    kind: &'static str,
    n_points: usize,
    fit: T,
}

fn fit(what: FitCommand) -> CliResult {
    match what {
        FitCommand::Buildup { input, free_baseline, out } => {
            let t = read_table(&input)?;
            let curve = io::buildup_from_table(&t).map_err(|e| prefix(e, &input))?;
            let mode = if free_baseline { BaselineMode::Free } else { BaselineMode::Fixed };
            let f = fit_buildup(&curve, mode)?;
            warn_all(&f.warnings);
            emit_json(out.as_deref(), &FitReport { kind: "buildup", n_points: t.rows.len(), fit: f })
        }
        FitCommand::Echo { input, out } => {
            let t = read_table(&input)?;
            let times = t.column("time_s").map_err(|e| prefix(e, &input))?;
            let amp = t.column("amplitude").map_err(|e| prefix(e, &input))?;
            let f = fit_biexponential(&times, &amp, &BiexpOptions::default())?;
            warn_all(&f.warnings);
            emit_json(out.as_deref(), &FitReport { kind: "echo", n_points: t.rows.len(), fit: f })
        }
        FitCommand::T1 { input, flip_deg, tau_s, out } => {
            let t = read_table(&input)?;
            let flip = flip_deg
                .or(t.meta_f64("flip_deg")?)
                .ok_or_else(|| input_error("flip angle missing: pass --flip-deg"))?;
            let tau = tau_s
                .or(t.meta_f64("tau_s")?)
                .ok_or_else(|| input_error("pulse spacing missing: pass --tau-s"))?;
            let series = t.column("signal").map_err(|e| prefix(e, &input))?;
            let f = fit_t1_small_flip(&series, flip.to_radians(), tau)?;
            emit_json(out.as_deref(), &FitReport { kind: "small_flip_t1", n_points: series.len(), fit: f })
        }
    }
}

#[derive(Serialize)]
struct BootstrapReport {
    sample: Option<String>,
    seed: u64,
    bootstrap: nvdnp::signal::BootstrapResult,
    enhancement: nvdnp::signal::EnhancementReport,
}

fn bootstrap(cfg: &Config, a: BootstrapArgs) -> CliResult {
    let ds = io::read_dataset(&a.dataset).map_err(|e| match e {
        Error::Io(io) => input_error(format!("{}: {io}", a.dataset.join(io::MANIFEST).display())),
        other => other.into(),
    })?;
    let hp = ds
        .hyperpolarized
        .as_ref()
        .ok_or_else(|| input_error("manifest names no hyperpolarized reference FID"))?;
    let correction = match (a.correction, ds.manifest.correction_factor, &ds.manifest.sample) {
        (Some(c), _, _) | (None, Some(c), _) => c,
        (None, None, Some(label)) => cfg.sample(label)?.correction_factor.unwrap_or(1.0),
        _ => 1.0,
    };
    let amplitude = |rec: &nvdnp::signal::FidRecord| Ok(fit_scaling_factor(rec, hp, ScaleChannel::Real)?.scale.value);
    let boot = bootstrap_amplitude(&ds.store, amplitude, a.resamples, a.seed)?;
    let mode = match a.ci {
        CiArg::Auto => CiMode::Auto,
        CiArg::Symmetric => CiMode::Symmetric,
        CiArg::BoundTransform => CiMode::BoundTransform,
        CiArg::Percentile => CiMode::Percentile,
    };
    let enh = enhancement_with_ci(1.0, &boot, correction, mode)?;
    warn_all(&enh.warnings);
    let boot = if a.keep_distribution { boot } else { boot.without_distribution() };
    emit_json(
        a.out.as_deref(),
        &BootstrapReport { sample: ds.manifest.sample.clone(), seed: a.seed, bootstrap: boot, enhancement: enh },
    )
}

#[derive(Serialize)]
struct AcquisitionEntry {
    file: String,
    index: usize,
    t_start_s: f64,
    mw_ghz: Option<f64>,
    amplitude: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct SweepPoint {
    mw_ghz: f64,
    acquisitions: Vec<AcquisitionEntry>,
}

#[derive(Serialize)]
struct SimulationManifest {
    plan: String,
    sample: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    acquisitions: Option<Vec<AcquisitionEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<Vec<SweepPoint>>,
    warnings: Vec<String>,
}

fn write_acquisitions(dir: &Path, prefix: &str, ex: &Execution) -> CliResult<Vec<AcquisitionEntry>> {
    ex.acquisitions
        .iter()
        .map(|a| {
            let file = format!("{prefix}acq_{:03}.csv", a.index);
            let mut t = io::fid_table(&a.fid).with_meta("amplitude", a.amplitude);
            if let Some(f) = a.mw_ghz {
                t = t.with_meta("mw_ghz", f);
            }
            t.write(&dir.join(&file))?;
            Ok(AcquisitionEntry {
                file,
                index: a.index,
                t_start_s: a.t_start_s,
                mw_ghz: a.mw_ghz,
                amplitude: a.amplitude,
                warnings: a.warnings.clone(),
            })
        })
        .collect()
}

fn physics_for(cfg: &Config, sample: &SampleParams, noise: f64) -> CliResult<PhysicsConfig> {
    let profile = cfg.dnp(sample.enrichment, Branch::Plus, None)?;
    let p_th = cfg.thermal_polarization(sample.field_t)?;
    let mut physics = PhysicsConfig::for_sample(sample, profile, p_th);
    physics.noise_sigma = noise;
    Ok(physics)
}

fn simulate(cfg: &Config, a: SimulateArgs) -> CliResult {
    let text = std::fs::read_to_string(&a.plan)
        .map_err(|e| input_error(format!("{}: {e}", a.plan.display())))?;
    let ast = parse_plan(&text).map_err(|e| input_error(format!("{}: {e}", a.plan.display())))?;
    let timeline = compile_timeline(&ast, &cfg.compile)?;
    let sample = cfg.sample(&a.sample)?.clone();
    let physics = physics_for(cfg, &sample, a.noise)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let mut warnings = Vec::new();
    if ast.acquisition_count() == 0 {
        warnings.push("plan contains no acquire statement".to_string());
    }
    let mut manifest = SimulationManifest {
        plan: a.plan.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        sample: sample.label.clone(),
        seed: a.seed,
        acquisitions: None,
        sweep: None,
        warnings: Vec::new(),
    };
    match (a.sweep_span_mhz, a.sweep_points) {
        (Some(span), Some(n)) => {
            let center = cfg.odmr_model(Branch::Plus)?.center_ghz();
            let freqs = GridSpec::centered(center, span, n)?.frequencies();
            let runs = sweep_frequencies(&timeline, &sample, &physics, &freqs, a.seed)?;
            let mut points = Vec::with_capacity(runs.len());
            let mut signal = Vec::with_capacity(runs.len());
            for (i, (ex, &f)) in runs.iter().zip(&freqs).enumerate() {
                warnings.extend(ex.warnings.iter().cloned());
                signal.push(ex.acquisitions.last().map_or(0.0, |q| q.amplitude));
                points.push(SweepPoint {
                    mw_ghz: f,
                    acquisitions: write_acquisitions(&a.out_dir, &format!("sweep_{i:03}_"), ex)?,
                });
            }
            let curve = DnpSpectrum::new(freqs, signal)?;
            io::dnp_table(&curve)
                .with_meta("sample", &sample.label)
                .with_meta("seed", a.seed)
                .write(&a.out_dir.join("sweep.csv"))?;
            manifest.sweep = Some(points);
        }
        _ => {
            let ex = execute_plan(&timeline, &sample, &physics, a.seed)?;
            warnings.extend(ex.warnings.iter().cloned());
            manifest.acquisitions = Some(write_acquisitions(&a.out_dir, "", &ex)?);
        }
    }
    warnings.dedup();
    warn_all(&warnings);
    manifest.warnings = warnings;
    emit_json(Some(&a.out_dir.join(io::MANIFEST)), &manifest)
}

fn linspace(end: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n).map(|i| end * i as f64 / (n - 1) as f64).collect()
}

fn synth(cfg: &Config, what: SynthCommand) -> CliResult {
    match what {
        SynthCommand::Buildup { sample, points, t_end_s, noise, seed, out } => {
            let s = cfg.sample(&sample)?;
            let p_max = s.enhancement * cfg.thermal_polarization(s.field_t)?;
            let times = linspace(t_end_s.unwrap_or(5.0 * s.t_dnp_s), points);
            let c = simulate_buildup(s.t_dnp_s, p_max, &times, noise * p_max, seed)?;
            let t = io::buildup_table(&c)
                .with_meta("sample", &s.label)
                .with_meta("t_dnp_s", s.t_dnp_s)
                .with_meta("seed", seed);
            emit(out.as_deref(), &t.to_csv_string()?)
        }
        SynthCommand::Echo { sample, n_echoes, noise, seed, out } => {
            let s = cfg.sample(&sample)?;
            let [t_fast, t_slow] = s
                .t2_pair_ms
                .ok_or_else(|| input_error(format!("sample {} has no T2 pair", s.label)))?;
            let params = EchoParams {
                a1: 0.5,
                t2_1_s: t_fast * 1e-3,
                a2: 0.5,
                t2_2_s: t_slow * 1e-3,
                tau_s: 4.0 * t_slow * 1e-3 / n_echoes as f64,
                n_echoes,
                noise_sigma: noise,
                ..EchoParams::default()
            };
            let train = synthesize_echo_train(&params, seed)?;
            let t = Table::from_columns(&["time_s", "amplitude"], &[&train.times(), &train.envelope()?])?
                .with_meta("kind", "echo")
                .with_meta("sample", &s.label)
                .with_meta("seed", seed);
            emit(out.as_deref(), &t.to_csv_string()?)
        }
        SynthCommand::T1 { sample, n, tau_s, noise, seed, out } => {
            let s = cfg.sample(&sample)?;
            let flip = s
                .small_flip_deg
                .ok_or_else(|| input_error(format!("sample {} has no small-flip angle", s.label)))?;
            let series = simulate_small_flip(s.t1n_s, flip.to_radians(), tau_s, n, noise, seed)?;
            let k: Vec<f64> = (0..series.len()).map(|i| i as f64).collect();
            let t = Table::from_columns(&["k", "signal"], &[&k, &series])?
                .with_meta("kind", "small_flip")
                .with_meta("sample", &s.label)
                .with_meta("flip_deg", flip)
                .with_meta("tau_s", tau_s)
                .with_meta("seed", seed);
            emit(out.as_deref(), &t.to_csv_string()?)
        }
        SynthCommand::Dataset { sample, out_dir, blocks, rel_noise, points, seed } => {
            synth_dataset(cfg, &sample, &out_dir, blocks, rel_noise, points, seed)
        }
    }
}

/// Thermal blocks of amplitude `1/(ε·c)` relative to a unit hyperpolarized
/// FID, with per-point noise set so the block-averaged amplitude has
/// relative standard error `rel_noise`.
fn synth_dataset(
    cfg: &Config,
    label: &str,
    dir: &PathBuf,
    blocks: usize,
    rel_noise: f64,
    points: usize,
    seed: u64,
) -> CliResult {
    let s = cfg.sample(label)?;
    let c = s.correction_factor.unwrap_or(1.0);
    let a_th = 1.0 / (s.enhancement * c);
    let dwell = 1e-6;
    let decay = DecayModel::Exponential { t2_s: points as f64 * dwell / 5.0 };
    let hp = synthesize_fid(1.0, decay.clone(), 0.0, 0.0, 0, points, dwell)?;
    let energy: f64 = hp.real().iter().map(|v| v * v).sum();
    let sigma = rel_noise * a_th * (blocks as f64 * energy).sqrt();
    let recs = (0..blocks)
        .map(|i| synthesize_fid(a_th, decay.clone(), 0.0, sigma, derive_seed(seed, "block", i as u64), points, dwell))
        .collect::<nvdnp::Result<Vec<_>>>()?;
    let mut manifest = Manifest {
        sample: Some(s.label.clone()),
        correction_factor: Some(c),
        ..Manifest::default()
    };
    manifest.metadata.insert("seed".into(), seed.to_string());
    manifest.metadata.insert("rel_noise".into(), rel_noise.to_string());
    io::write_dataset(dir, &DatasetStore::new(recs)?, Some(&hp), manifest)?;
    Ok(())
}
