//! Command-line driver for the `kpolar` experiments.
//!
//! Settings come from an optional `--config` file, then the common flags, then
//! any `--set key=value` pairs, in that order of precedence (last wins).

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{run, CliError, Command};
pub use config::{ConfigError, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "kpolar", version, about = "Polarization experiments for binary kernels")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Partial distances, exponents and derived kernel of a kernel (JSON).
    KernelAnalyze(Opts),
    /// Bhattacharyya values of every synthetic channel (CSV).
    Polarize(Opts),
    /// Exact fraction of good channels against the Gaussian prediction (CSV).
    ScalingVerify(Opts),
    /// Fraction of channels below 2^-ℓ^(βn) (CSV).
    ExponentVerify(Opts),
    /// Polar, RM and hybrid selections with their bounds (CSV).
    SelectionCompare(Opts),
    /// SC and MAP decoding simulation over the BEC (CSV).
    CodecSim(Opts),
    /// MAP lower bound against the weight-exponent prediction (CSV).
    MapBound(Opts),
}

#[derive(Debug, Args)]
struct Opts {
    /// Flat `key = value` experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Kernel literal, rows separated by ';' (e.g. "10;11").
    #[arg(long)]
    kernel: Option<String>,
    /// Erasure probability of the BEC.
    #[arg(long)]
    eps: Option<String>,
    /// Depth or comma-separated depths.
    #[arg(long)]
    n: Option<String>,
    /// Rate or comma-separated rates.
    #[arg(long)]
    rate: Option<String>,
    /// Threshold offset or comma-separated offsets.
    #[arg(long, allow_hyphen_values = true)]
    t: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// Largest number of leaves enumerated exactly.
    #[arg(long)]
    budget: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<String>,
    /// Any other config key, e.g. `--set beta=0.4,0.6`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Sub {
    fn split(self) -> (Command, Opts) {
        match self {
            Sub::KernelAnalyze(o) => (Command::KernelAnalyze, o),
            Sub::Polarize(o) => (Command::Polarize, o),
            Sub::ScalingVerify(o) => (Command::ScalingVerify, o),
            Sub::ExponentVerify(o) => (Command::ExponentVerify, o),
            Sub::SelectionCompare(o) => (Command::SelectionCompare, o),
            Sub::CodecSim(o) => (Command::CodecSim, o),
            Sub::MapBound(o) => (Command::MapBound, o),
        }
    }
}

fn build_config(opts: Opts) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    let flags = [
        ("kernel", opts.kernel),
        ("eps", opts.eps),
        ("n", opts.n),
        ("rate", opts.rate),
        ("t", opts.t),
        ("seed", opts.seed),
        ("trials", opts.trials),
        ("budget", opts.budget),
        ("out", opts.out),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    for pair in &opts.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: 0, message: format!("--set expects KEY=VALUE, got `{pair}`") })?;
        cfg.set(key.trim(), value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let text = run(cmd, cfg)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (cmd, opts) = cli.command.split();
    let result = build_config(opts).map_err(CliError::from).and_then(|cfg| execute(cmd, &cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("kpolar: {e}");
            e.exit_code()
        }
    }
}
