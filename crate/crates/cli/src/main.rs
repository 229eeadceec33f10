mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{CommandError, Context};
use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "qslopt", version, about = "Time-optimal state transfer by direct Hilbert velocity ascent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides `seed.rng_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Constant-control scan over the duration range.
    Evolve,
    /// Optimize at a single duration.
    Optimize,
    /// Trace optimum classes in duration.
    Trace,
    /// Extrapolate the speed limit from a trace.
    Qsl,
    /// Check the duration-redistribution response at an optimum.
    RedistributeCheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qslopt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, CommandError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| config::ConfigError::new("--config", "a configuration file is required"))?;
    let cfg = RunConfig::load(path)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| config::ConfigError::new("--threads", e.to_string()))?;
    let ctx = Context {
        rng_seed: cli.seed.unwrap_or(cfg.seed.rng_seed),
        cfg,
    };
    let outcome = pool.install(|| match cli.command {
        Command::Evolve => commands::evolve(&ctx),
        Command::Optimize => commands::optimize(&ctx),
        Command::Trace => commands::trace(&ctx),
        Command::Qsl => commands::qsl(&ctx),
        Command::RedistributeCheck => commands::redistribute_check(&ctx),
    })?;
    outcome.files.commit(&cli.out)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    Ok(ExitCode::from(outcome.exit_code))
}
