mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// NV⁻-driven ¹³C DNP: spectra, sweeps, fits, bootstrap and protocol simulation.
#[derive(Debug, Parser)]
#[command(name = "nvdnp", version)]
pub struct Cli {
    /// Configuration JSON; falls back to $NVDNP_CONFIG, then the bundled defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel sections (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// ODMR spectrum for one or more enrichments.
    Odmr(OdmrArgs),
    /// Signed DNP spectrum against microwave frequency.
    DnpSweep(DnpSweepArgs),
    /// Fit a buildup curve, echo envelope or small-flip series.
    Fit {
        #[command(subcommand)]
        what: FitCommand,
    },
    /// Bootstrap a thermal dataset directory into an enhancement report.
    Bootstrap(BootstrapArgs),
    /// Execute a pulse-sequence plan against a sample.
    Simulate(SimulateArgs),
    /// Synthetic input data for the other commands.
    Synth {
        #[command(subcommand)]
        what: SynthCommand,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BranchArg {
    Plus,
    Minus,
}

impl From<BranchArg> for nvdnp::spin::Branch {
    fn from(b: BranchArg) -> Self {
        match b {
            BranchArg::Plus => nvdnp::spin::Branch::Plus,
            BranchArg::Minus => nvdnp::spin::Branch::Minus,
        }
    }
}

#[derive(Debug, Args)]
pub struct TensorArgs {
    /// Replace every first-shell tensor by a secular one of this A_zz (MHz).
    #[arg(long)]
    pub secular_mhz: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OdmrArgs {
    /// ¹³C enrichment(s) in [0, 1].
    #[arg(long = "p", required = true, num_args = 1..)]
    pub p: Vec<f64>,
    #[arg(long, value_enum, default_value = "plus")]
    pub branch: BranchArg,
    #[arg(long, default_value_t = 0.25)]
    pub step_mhz: f64,
    #[command(flatten)]
    pub tensors: TensorArgs,
    /// Directory for `odmr_p<p>.csv` files; a single spectrum goes to stdout without it.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["sample", "p"])))]
pub struct DnpSweepArgs {
    #[arg(long)]
    pub sample: Option<String>,
    #[arg(long = "p")]
    pub p: Option<f64>,
    #[arg(long, value_enum, default_value = "plus")]
    pub branch: BranchArg,
    /// Nuclear Larmor frequency (MHz); defaults to the value at the configured field.
    #[arg(long)]
    pub nu_n: Option<f64>,
    /// Resample onto a grid of this span (MHz) centred on the bare line.
    #[arg(long, requires = "points")]
    pub span_mhz: Option<f64>,
    #[arg(long, requires = "span_mhz")]
    pub points: Option<usize>,
    /// Scale so that max |S| = 1.
    #[arg(long)]
    pub normalize: bool,
    /// Check antisymmetry about the grid centre; exit 3 if it fails.
    #[arg(long)]
    pub verify: bool,
    #[command(flatten)]
    pub tensors: TensorArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum FitCommand {
    /// Columns time_s, polarization.
    Buildup {
        input: PathBuf,
        /// Fit a constant offset as well.
        #[arg(long)]
        free_baseline: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Columns time_s, amplitude.
    Echo {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Columns k, signal; angle and spacing from flags or file metadata.
    T1 {
        input: PathBuf,
        #[arg(long)]
        flip_deg: Option<f64>,
        #[arg(long)]
        tau_s: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CiArg {
    Auto,
    Symmetric,
    BoundTransform,
    Percentile,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    /// Directory holding manifest.json.
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub resamples: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "auto")]
    pub ci: CiArg,
    /// Overrides the manifest / sample correction factor.
    #[arg(long)]
    pub correction: Option<f64>,
    /// Include every resampled amplitude in the report.
    #[arg(long)]
    pub keep_distribution: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub plan: PathBuf,
    #[arg(long)]
    pub sample: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Sweep every `mw on` frequency across this span (MHz) around the bare line.
    #[arg(long, requires = "sweep_points")]
    pub sweep_span_mhz: Option<f64>,
    #[arg(long, requires = "sweep_span_mhz")]
    pub sweep_points: Option<usize>,
    /// Gaussian noise per FID quadrature, in units of the signal scale.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Buildup curve at the sample's T_DNP.
    Buildup {
        #[arg(long)]
        sample: String,
        #[arg(long, default_value_t = 60)]
        points: usize,
        /// Last sample time; defaults to 5·T_DNP.
        #[arg(long)]
        t_end_s: Option<f64>,
        /// Noise relative to the asymptote.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Echo-train envelope from the sample's T2 pair (equal amplitudes).
    Echo {
        #[arg(long)]
        sample: String,
        #[arg(long, default_value_t = 400)]
        n_echoes: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Small-flip readout series at the sample's T1 and flip angle.
    T1 {
        #[arg(long)]
        sample: String,
        #[arg(long, default_value_t = 40)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        tau_s: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Thermal block store plus hyperpolarized reference FID.
    Dataset {
        #[arg(long)]
        sample: String,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 16)]
        blocks: usize,
        /// Relative standard error of the block-averaged thermal amplitude.
        #[arg(long, default_value_t = 0.05)]
        rel_noise: f64,
        #[arg(long, default_value_t = 256)]
        points: usize,
        #[arg(long)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
