//! `salnet`: train, predict, evaluate and inspect saliency networks.
//!
//! Exit codes: 0 success, 1 gradient check failure, 2 invalid flags or spec,
//! 3 data or I/O error, 4 training divergence, 5 shape mismatch.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use salnet::Error;

#[derive(Parser, Debug)]
#[command(name = "salnet", version, about = "Saliency prediction networks on the CPU")]
struct Cli {
    /// Print progress to stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a network on a dataset directory.
    Train(TrainArgs),
    /// Write one saliency map per image.
    Predict(PredictArgs),
    /// Score predicted maps against ground truth.
    Eval(EvalArgs),
    /// Print the parameter and blob-memory table of a network.
    Inspect(InspectArgs),
    /// Finite-difference check of every layer kind and a small network.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic blob dataset.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct SpecArgs {
    /// Built-in network: shallow-salicon, shallow-isun, shallow-shrunken,
    /// shallow-tiny or deep.
    #[arg(long)]
    pub spec: Option<String>,
    /// Network description file.
    #[arg(long, value_name = "PATH")]
    pub spec_file: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// N(0, 0.01^2) weights, biases 0.1.
    Gaussian,
    /// N(0, 2/fan_in) weights, zero biases.
    He,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Dataset root with images/, maps/ and optionally fixations/.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Output directory for model.salnet, meta.txt, loss.csv and summary.txt.
    #[arg(long, value_name = "DIR", default_value = "run")]
    pub out: PathBuf,
    /// Stop after this many iterations.
    #[arg(long, conflicts_with = "epochs")]
    pub iters: Option<usize>,
    /// Stop after this many epochs.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch: Option<u64>,
    /// Constant learning rate in place of the recipe's schedule.
    #[arg(long, value_parser = positive)]
    pub lr: Option<f64>,
    #[arg(long, value_parser = unit_interval)]
    pub momentum: Option<f64>,
    #[arg(long, value_parser = non_negative)]
    pub weight_decay: Option<f64>,
    /// Row-norm cap for fully-connected layers.
    #[arg(long, value_parser = positive, conflicts_with = "no_maxnorm")]
    pub maxnorm: Option<f64>,
    #[arg(long)]
    pub no_maxnorm: bool,
    /// Weight initialization; defaults to gaussian for shallow nets, he for deep.
    #[arg(long, value_enum)]
    pub init: Option<Init>,
    /// Model file to copy weight layers from before training.
    #[arg(long, value_name = "PATH")]
    pub import: Option<PathBuf>,
    /// Weight-layer pairs `donor:target` (0-based), comma separated.
    #[arg(long, value_delimiter = ',', value_parser = layer_pair, requires = "import")]
    pub import_map: Vec<(usize, usize)>,
    /// Share of samples held out for validation; 0 trains on everything.
    #[arg(long, default_value_t = 0.0, value_parser = fraction)]
    pub val_fraction: f64,
    /// Iterations between validation passes.
    #[arg(long, default_value_t = 100)]
    pub val_interval: usize,
    /// Add horizontally mirrored copies of the training images.
    #[arg(long)]
    pub mirror: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Dataset statistics; defaults to meta.txt beside the model.
    #[arg(long, value_name = "PATH")]
    pub meta: Option<PathBuf>,
    /// Dataset root with an images/ directory.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Gaussian smoothing of the resized output; defaults to 2 for vector
    /// outputs and 0 for full-resolution ones.
    #[arg(long, value_parser = non_negative)]
    pub sigma: Option<f64>,
    /// Also write `<id>.f32` files with full-precision maps.
    #[arg(long)]
    pub raw: bool,
    #[arg(long, env = "SALNET_THREADS", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Ground-truth dataset root.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Directory of `<id>.png` predictions; repeat to rank several models.
    #[arg(long, value_name = "DIR", required = true)]
    pub pred: Vec<PathBuf>,
    /// Model label per --pred directory; defaults to the directory name.
    #[arg(long)]
    pub name: Vec<String>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub splits: u64,
    /// Blur of fixation impulses when an image has no ground-truth map.
    #[arg(long, default_value_t = salnet::metrics::DEFAULT_FIXATION_SIGMA, value_parser = non_negative)]
    pub sigma_fix: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Input height; defaults to the network's own input size.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), requires = "width")]
    pub height: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), requires = "height")]
    pub width: Option<u64>,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Number of random instances per layer kind and network checks.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-5, value_parser = positive)]
    pub epsilon: f64,
    /// Relative-error threshold for single layers.
    #[arg(long, default_value_t = 1e-4, value_parser = positive)]
    pub tol: f64,
    /// Relative-error threshold for the whole network.
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    pub net_tol: f64,
    /// Coordinates sampled per parameter block in the network check.
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..))]
    pub net_coords: u64,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 96, value_parser = clap::value_parser!(u64).range(32..))]
    pub side: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s} is not finite"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be >= 0, got {v}"))
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 1), got {v}"))
    }
}

fn fraction(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 1), got {v}"))
    }
}

fn layer_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected donor:target, got {s}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

/// Failure of a subcommand with its exit code.
#[derive(Debug)]
pub enum Failure {
    GradientCheck(String),
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::GradientCheck(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Lib(e) => match e {
                Error::Config(_) | Error::SpecParse { .. } => 2,
                Error::Diverged { .. } | Error::NonFinite(_) => 4,
                Error::ShapeMismatch { .. } | Error::CacheMismatch { .. } => 5,
                _ => 3,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::GradientCheck(m) | Failure::Usage(m) => f.write_str(m),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = cli.verbose;
    let result = match cli.command {
        Command::Train(a) => commands::train(a, verbose),
        Command::Predict(a) => commands::predict(a, verbose),
        Command::Eval(a) => commands::eval(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::Gradcheck(a) => commands::gradcheck(a, verbose),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("salnet: {f}");
            ExitCode::from(f.code())
        }
    }
}
