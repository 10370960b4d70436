//! Command-line driver for the vortexiter workspace.
//!
//! Four commands share one contract: flat key=value configs (flags override
//! file keys), a `manifest` in every output directory that reproduces the
//! run bit-exactly, and stable exit codes — 0 for success (including a
//! fixed-point run that reports non-convergence), 1 for a numerical failure
//! mid-run, 2 for configuration or usage errors.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use vortexiter_core::Error as CoreError;

/// Errors carried to the process boundary, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2: the run never started (bad flags, keys, values, or inputs).
    Config(String),
    /// Exit 1: the computation started and aborted (instability, blow-up,
    /// non-finite data).
    Numeric(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) => m,
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            // Failures of the run itself: the inputs were legal but the
            // numbers went bad.
            CoreError::NonFinite(_)
            | CoreError::CflViolation { .. }
            | CoreError::BlowUp { .. }
            | CoreError::MassDrift { .. }
            | CoreError::NegativeDensity { .. }
            | CoreError::NonFiniteDrift { .. } => CliError::Numeric(e.to_string()),
            // Everything else is a precondition the config failed to meet,
            // including unreadable or malformed input files.
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "vortexiter",
    about = "Pseudo-spectral vorticity iteration, stochastic kernel estimators, and envelope checks on the periodic box",
    version
)]
struct Cli {
    /// Worker threads (default: all cores; env VORTEXITER_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the config-driven commands.
#[derive(Args, Debug)]
struct CommonArgs {
    /// Key=value config file; flags override its keys.
    #[arg(long)]
    config: Option<std::path::PathBuf>,

    /// Output directory (key: out).
    #[arg(long)]
    out: Option<String>,

    /// Extra key=value overrides, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl CommonArgs {
    /// Folds dedicated flags plus --set pairs into override entries.
    fn overrides(
        &self,
        flag_pairs: Vec<(String, Option<String>)>,
    ) -> Result<Vec<(String, String)>, CliError> {
        let mut out = Vec::new();
        if let Some(dir) = &self.out {
            out.push(("out".to_string(), dir.clone()));
        }
        for (key, value) in flag_pairs {
            if let Some(value) = value {
                out.push((key, value));
            }
        }
        for pair in &self.set {
            let Some((k, v)) = pair.split_once('=') else {
                return Err(CliError::config(format!(
                    "--set expects KEY=VALUE, got `{pair}`"
                )));
            };
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the fixed-point velocity iteration and write its report.
    Iterate {
        #[command(flatten)]
        common: CommonArgs,
        /// Initial data preset (key: preset = taylor-green|file).
        #[arg(long)]
        preset: Option<String>,
        /// Preset amplitude (key: amplitude).
        #[arg(long)]
        amplitude: Option<f64>,
        /// Grid resolution per axis (key: n).
        #[arg(long)]
        n: Option<usize>,
        /// Physical time step (key: dt).
        #[arg(long)]
        dt: Option<f64>,
        /// Physical horizon, or `auto` for the vorticity-based estimate
        /// (key: T).
        #[arg(long = "T", value_name = "TIME|auto")]
        horizon: Option<String>,
    },
    /// Estimate transition densities by Monte Carlo and/or the grid PDE.
    Kernel {
        #[command(flatten)]
        common: CommonArgs,
        /// Drift preset (key: drift = zero|const|shear|taylor-green|file).
        #[arg(long)]
        drift: Option<String>,
        /// Estimation route (key: method = mc|pde|both).
        #[arg(long)]
        method: Option<String>,
        /// Drift amplitude for shear/taylor-green (key: amplitude).
        #[arg(long)]
        amplitude: Option<f64>,
        /// Evaluation time (key: t).
        #[arg(long)]
        t: Option<f64>,
        /// Monte Carlo path count (key: n_paths).
        #[arg(long)]
        n_paths: Option<usize>,
        /// Master seed (key: seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check Gaussian-envelope inequalities and write a report table.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Which checks to run (key: sweep =
        /// pointwise|integrals|envelopes|all).
        #[arg(long)]
        sweep: Option<String>,
        /// Master seed for the Monte Carlo legs (key: seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Inspect a VF3D field file or convert it to CSV.
    Fields {
        /// Field file to read.
        input: std::path::PathBuf,
        /// Write the samples as CSV to this path.
        #[arg(long)]
        csv: Option<std::path::PathBuf>,
    },
}

fn opt_string(v: &Option<String>) -> Option<String> {
    v.clone()
}

fn opt_display<T: std::fmt::Display>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(|x| format!("{x}"))
}

fn init_threads(flag: Option<usize>) -> Result<(), CliError> {
    let from_env = std::env::var("VORTEXITER_THREADS")
        .ok()
        .map(|v| {
            v.parse::<usize>().map_err(|_| {
                CliError::config(format!("VORTEXITER_THREADS: expected an integer, got `{v}`"))
            })
        })
        .transpose()?;
    if let Some(n) = flag.or(from_env) {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot size the thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Iterate {
            common,
            preset,
            amplitude,
            n,
            dt,
            horizon,
        } => {
            let overrides = common.overrides(vec![
                ("preset".into(), opt_string(&preset)),
                ("amplitude".into(), opt_display(&amplitude)),
                ("n".into(), opt_display(&n)),
                ("dt".into(), opt_display(&dt)),
                ("T".into(), opt_string(&horizon)),
            ])?;
            let cfg = config::Config::load(common.config.as_deref(), &overrides, "iterate")?;
            commands::iterate::run(cfg)
        }
        Command::Kernel {
            common,
            drift,
            method,
            amplitude,
            t,
            n_paths,
            seed,
        } => {
            let overrides = common.overrides(vec![
                ("drift".into(), opt_string(&drift)),
                ("method".into(), opt_string(&method)),
                ("amplitude".into(), opt_display(&amplitude)),
                ("t".into(), opt_display(&t)),
                ("n_paths".into(), opt_display(&n_paths)),
                ("seed".into(), opt_display(&seed)),
            ])?;
            let cfg = config::Config::load(common.config.as_deref(), &overrides, "kernel")?;
            commands::kernel::run(cfg)
        }
        Command::Verify { common, sweep, seed } => {
            let overrides = common.overrides(vec![
                ("sweep".into(), opt_string(&sweep)),
                ("seed".into(), opt_display(&seed)),
            ])?;
            let cfg = config::Config::load(common.config.as_deref(), &overrides, "verify")?;
            commands::verify::run(cfg)
        }
        Command::Fields { input, csv } => commands::fields::run(&input, csv.as_deref()),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // Clap exits 0 for --help/--version and 2 for usage errors.
        Err(e) => e.exit(),
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
