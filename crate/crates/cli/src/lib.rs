//! Command-line front end for `husimi-lab`.
//!
//! Every run writes its data files plus `manifest.json` into `--out`. Passing
//! that manifest back through `--config` replays the run with identical
//! output bytes, whatever `--threads` is.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod presets;
pub mod selftest;

pub use config::RunConfig;
pub use error::CliError;
pub use manifest::Manifest;

#[derive(Debug, Parser)]
#[command(name = "husimi-lab", version, about = "Husimi functions, Wehrl entropy and the Bayesian sampling experiment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Wehrl entropy of a spin or CV state.
    Wehrl(Invocation),
    /// Husimi function tabulated on a quadrature grid.
    HusimiGrid(Invocation),
    /// Run a sampling experiment and test the recorded histogram.
    Experiment(Invocation),
    /// Charged top: rigid body vs averaged precession vs canonical flow.
    Top(Invocation),
    /// Summary of a continuous-variable state.
    Cv(Invocation),
    /// Closed-form oracle checks.
    Selftest(Invocation),
}

#[derive(Debug, Clone, Args)]
pub struct Invocation {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads (output does not depend on it).
    #[arg(long)]
    pub threads: Option<usize>,

    /// TOML config, or a manifest.json from an earlier run to replay it.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub run: RunConfig,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Wehrl(_) => "wehrl",
            Command::HusimiGrid(_) => "husimi-grid",
            Command::Experiment(_) => "experiment",
            Command::Top(_) => "top",
            Command::Cv(_) => "cv",
            Command::Selftest(_) => "selftest",
        }
    }

    fn invocation(&self) -> &Invocation {
        match self {
            Command::Wehrl(i)
            | Command::HusimiGrid(i)
            | Command::Experiment(i)
            | Command::Top(i)
            | Command::Cv(i)
            | Command::Selftest(i) => i,
        }
    }
}

type Runner = fn(&mut RunConfig, &mut manifest::OutputDir) -> Result<i32, CliError>;

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    let started = Instant::now();
    let name = cli.command.name();
    let inv = cli.command.invocation().clone();
    let mut cfg = match &inv.config {
        Some(path) => inv.run.clone().over(RunConfig::load(path, name)?),
        None => inv.run.clone(),
    };
    let runner: Runner = match cli.command {
        Command::Wehrl(_) => commands::wehrl,
        Command::HusimiGrid(_) => commands::husimi_grid,
        Command::Experiment(_) => commands::experiment,
        Command::Top(_) => commands::top,
        Command::Cv(_) => commands::cv,
        Command::Selftest(_) => commands::selftest,
    };
    let mut out = manifest::OutputDir::create(&inv.out)?;
    let body = |cfg: &mut RunConfig, out: &mut manifest::OutputDir| {
        let code = runner(cfg, out)?;
        Ok::<_, CliError>((code, rayon::current_num_threads()))
    };
    let (code, threads) = match inv.threads {
        Some(0) => return Err(CliError::Input("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?
            .install(|| body(&mut cfg, &mut out))?,
        None => body(&mut cfg, &mut out)?,
    };
    out.finish(name, cfg, threads, started.elapsed().as_secs_f64())?;
    Ok(code)
}
