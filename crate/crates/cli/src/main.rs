//! `afcsim`: command-line front end for the memory entanglement simulator.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afc_core::config::{load_config, ExperimentConfig};
use afc_core::experiments::{self, ExperimentError};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "afcsim", version, about = "Heralded entanglement between two AFC memories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and write run.json.
    Run(Common),
    /// Effective fidelity over the mu grid; writes fidelity.csv.
    FidelitySweep(Common),
    /// Heralding probability and rate versus mode number; writes rate.csv.
    RateSweep(Common),
    /// Simulated tomography; writes tomography.json and interference.csv.
    Tomography(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file; defaults are used for anything missing.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if needed.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => load_config(path).map_err(|e| Failure::Config(e.to_string()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(common) => {
            let config = load(&common)?;
            let summary = experiments::run(&config)?;
            eprintln!(
                "p_h = {:.4e} ± {:.1e}, rate = {:.4e} Hz",
                summary.p_h, summary.p_h_stderr, summary.rate_hz
            );
            write_outputs(&common.out, &[("run.json", experiments::run_json(&summary))])
        }
        Command::FidelitySweep(common) => {
            let config = load(&common)?;
            let points = experiments::fidelity_sweep(&config)?;
            write_outputs(&common.out, &[("fidelity.csv", experiments::fidelity_csv(&points))])
        }
        Command::RateSweep(common) => {
            let config = load(&common)?;
            let points = experiments::rate_sweep(&config)?;
            write_outputs(&common.out, &[("rate.csv", experiments::rate_csv(&points))])
        }
        Command::Tomography(common) => {
            let config = load(&common)?;
            let result = experiments::tomography(&config)?;
            for warning in &result.diagonal.warnings {
                eprintln!("warning: {warning}");
            }
            eprintln!(
                "visibility = {:.4}, |d| = {:.4}",
                result.coherence.visibility, result.coherence.d_abs
            );
            write_outputs(
                &common.out,
                &[
                    ("tomography.json", experiments::tomography_json(&result)),
                    ("interference.csv", experiments::interference_csv(&result.interference)),
                ],
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(message)) => {
            eprintln!("config error: {message}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
