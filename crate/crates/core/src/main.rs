use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use curvegas::experiment::{self, ExperimentConfig, Format};
use curvegas::{Error, Result};

/// Dyson Brownian motion on Jordan curves: run one experiment file.
#[derive(Debug, Parser)]
#[command(name = "curvegas", version)]
struct Cli {
    /// Experiment file (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the seed in the experiment file.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Overrides the artifact format.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads; all cores when unset.
    #[arg(long, env = "CURVEGAS_THREADS")]
    threads: Option<usize>,
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = ExperimentConfig::from_file(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = cli.output {
        cfg.output_dir = dir;
    }
    if let Some(format) = cli.format {
        cfg.format = format;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::config("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config("--threads", e.to_string()))?;
    }
    let outcome = experiment::run(&cfg)?;
    for path in &outcome.artifacts {
        println!("{}", path.display());
    }
    Ok(outcome.all_passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("curvegas: some diagnostics failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("curvegas: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
