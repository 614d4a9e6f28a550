//! The `foliate` command line.
//!
//! Every subcommand writes its artifacts atomically into one output
//! directory together with a `manifest.json` that `foliate replay` can
//! re-run. Exit codes: 0 success, 1 usage, 2 I/O, 3 property-suite failure.

// Like `println!`, but a closed stdout (e.g. piped into `head`) is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

mod commands;
mod manifest;

pub use manifest::{file_digest, sha256_hex, write_atomic, RunManifest, MANIFEST_FILE};

use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Overrides the default output directory (`runs/<subcommand>`) when `--out` is absent.
pub const OUT_DIR_ENV: &str = "FOLIATE_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_SUITE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("property suite failed: {0}")]
    SuiteFailure(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::SuiteFailure(_) => EXIT_SUITE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "foliate",
    version,
    about = "Local data matrices, foliation checks and leaf-following paths for ReLU classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a dense ReLU classifier with plain SGD, logging the mean trace of G per batch.
    Train(TrainArgs),
    /// Run the property suites (PSD, rank bound, kernel, zero-mean identity, trace, projection).
    Check(CheckArgs),
    /// Spectra of G at dataset points.
    Spectrum(SpectrumArgs),
    /// Finite-difference Lie brackets of the input-gradient fields.
    Involutivity(InvolutivityArgs),
    /// Horizontal path between two dataset points.
    Path(PathArgs),
    /// Kernel walk from a dataset point along a fixed random direction.
    Noise(NoiseArgs),
    /// Write a dataset to IDX image/label files.
    Export(ExportArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Check(_) => "check",
            Command::Spectrum(_) => "spectrum",
            Command::Involutivity(_) => "involutivity",
            Command::Path(_) => "path",
            Command::Noise(_) => "noise",
            Command::Export(_) => "export",
            Command::Replay(_) => "replay",
        }
    }
}

/// Exactly one data source: IDX files, Gaussian blobs or procedural glyphs.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// IDX image file (magic 0x00000803).
    #[arg(long, requires = "labels")]
    pub images: Option<PathBuf>,
    /// IDX label file (magic 0x00000801).
    #[arg(long, requires = "images")]
    pub labels: Option<PathBuf>,
    /// Gaussian blob fixture (see --classes, --per-class, --dim, --spread).
    #[arg(long)]
    pub synthetic: bool,
    /// Procedural 28x28 digit glyphs, this many images.
    #[arg(long)]
    pub glyphs: Option<usize>,
    /// Class count (IDX default 10, blobs default 3).
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.05)]
    pub spread: f64,
    /// Seed for the synthetic sources.
    #[arg(long, default_value_t = 1)]
    pub data_seed: u64,
    /// Keep only the first N examples.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Standardize pixels with the MNIST mean and std instead of plain [0,1].
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Hidden layer widths, comma separated; empty for a linear-softmax model.
    #[arg(long, default_value = "128", value_delimiter = ',')]
    pub hidden: Vec<String>,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 60)]
    pub batch: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Batches between trace-of-G measurements (0 disables).
    #[arg(long, default_value_t = 1)]
    pub trace_every: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// Checkpoint to check; a fresh random net is used when absent.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Layer dims of the fresh random net.
    #[arg(long, default_value = "8,16,3", value_delimiter = ',')]
    pub dims: Vec<usize>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Points to sample (from the data if given, else uniform in [0,1]^n).
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// First N dataset points.
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct InvolutivityArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Generic points to accept (points whose probes cross a region are skipped).
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    /// `all` or a list like `0:1,2:5`.
    #[arg(long, default_value = "all")]
    pub pairs: String,
    /// Finite-difference step.
    #[arg(long, default_value_t = crate::geometry::DEFAULT_BRACKET_STEP)]
    pub h: f64,
    /// Also report the parameter-space bracket residuals.
    #[arg(long)]
    pub param_space: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub src: usize,
    #[arg(long)]
    pub dst: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 5000)]
    pub steps: usize,
    /// Stop once within this fraction of the initial distance.
    #[arg(long, default_value_t = 0.1)]
    pub stop_frac: f64,
    /// Push the source off its leaf along a kernel direction of this norm first.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
    #[arg(long, default_value_t = 500)]
    pub stride: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub idx: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Image side; the flat dimension must equal rows * cols.
    #[arg(long, default_value_t = 28)]
    pub rows: usize,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write into this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What a command produced, before it is written into the manifest.
#[derive(Debug, Default)]
pub(crate) struct Outcome {
    pub seeds: std::collections::BTreeMap<String, u64>,
    pub inputs: std::collections::BTreeMap<String, String>,
    pub artifacts: std::collections::BTreeMap<String, String>,
    pub summary: std::collections::BTreeMap<String, serde_json::Value>,
    pub suite_failed: Option<String>,
}

fn resolve_out(explicit: Option<&Path>, subcommand: &str) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(subcommand)))
        .unwrap_or_else(|| PathBuf::from("runs").join(subcommand))
}

fn out_of(command: &Command) -> Option<&Path> {
    match command {
        Command::Train(a) => a.out.as_deref(),
        Command::Check(a) => a.out.as_deref(),
        Command::Spectrum(a) => a.out.as_deref(),
        Command::Involutivity(a) => a.out.as_deref(),
        Command::Path(a) => a.out.as_deref(),
        Command::Noise(a) => a.out.as_deref(),
        Command::Export(a) => a.out.as_deref(),
        Command::Replay(a) => a.out.as_deref(),
    }
}

/// Argument list with any `--out` removed and the resolved directory appended.
fn pin_out(args: &[String], out: &Path) -> Vec<String> {
    let mut pinned = Vec::with_capacity(args.len() + 2);
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
        } else if a == "--out" {
            skip = true;
        } else if !a.starts_with("--out=") {
            pinned.push(a.clone());
        }
    }
    pinned.push("--out".into());
    pinned.push(out.display().to_string());
    pinned
}

/// Parses and runs one invocation; `args` excludes the program name.
pub fn run(args: Vec<String>) -> i32 {
    let parsed = std::iter::once("foliate".to_string()).chain(args.iter().cloned());
    let cli = match Cli::try_parse_from(parsed) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command, &args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("foliate: {e}");
            e.exit_code()
        }
    }
}

pub fn run_os(args: impl IntoIterator<Item = OsString>) -> i32 {
    let args: Vec<String> = args
        .into_iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    run(args)
}

fn execute(command: Command, raw_args: &[String]) -> Result<i32, CliError> {
    if let Command::Replay(r) = &command {
        let m = RunManifest::load(&r.manifest)?;
        let args = match &r.out {
            Some(out) => pin_out(&m.args, out),
            None => m.args.clone(),
        };
        if args.first().map(String::as_str) == Some("replay") {
            return Err(CliError::Usage("a manifest cannot replay another replay".into()));
        }
        return Ok(run(args));
    }
    let name = command.name();
    let out = resolve_out(out_of(&command), name);
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let started = Instant::now();
    let outcome = match &command {
        Command::Train(a) => commands::train(a, &out)?,
        Command::Check(a) => commands::check(a, &out)?,
        Command::Spectrum(a) => commands::spectrum(a, &out)?,
        Command::Involutivity(a) => commands::involutivity(a, &out)?,
        Command::Path(a) => commands::path(a, &out)?,
        Command::Noise(a) => commands::noise(a, &out)?,
        Command::Export(a) => commands::export(a, &out)?,
        Command::Replay(_) => unreachable!("handled above"),
    };
    let exit_code = if outcome.suite_failed.is_some() {
        EXIT_SUITE
    } else {
        EXIT_OK
    };
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: name.to_string(),
        args: pin_out(raw_args, &out),
        seeds: outcome.seeds,
        input_digests: outcome.inputs,
        artifacts: outcome.artifacts,
        out_dir: out.display().to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        exit_code,
        summary: outcome.summary,
    };
    let path = manifest.save(&out)?;
    say!("manifest: {}", path.display());
    if let Some(msg) = outcome.suite_failed {
        eprintln!("foliate: property suite failed: {msg}");
    }
    Ok(exit_code)
}
