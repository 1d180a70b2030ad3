use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mrbv_cli::commands::{self, Failure};

/// Worker count for the epsilon sweep and the probe batches.
const WORKERS_VAR: &str = "MRBV_WORKERS";

#[derive(Parser)]
#[command(name = "mrbv", version, about = "Multi-rate viscous sweeps and BV analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the epsilon sweep of a config and write the artifact directory.
    Solve { config: PathBuf },
    /// Recompute the checks of an artifact directory from its stored curves.
    Analyze { dir: PathBuf },
    /// Write long-format plot files under <dir>/plotdata.
    Plotdata { dir: PathBuf },
    /// Run the random property suites.
    Selftest {
        #[arg(long, default_value_t = 1000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn workers() -> Result<Option<usize>, Failure> {
    match std::env::var(WORKERS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Failure::Config(format!("{WORKERS_VAR}: expected a worker count, got {v:?}"))),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let n = workers()?;
    mrbv::par::with_workers(n, move || match cli.command {
        Command::Solve { config } => {
            let root = commands::solve(&config)?;
            println!("{}", root.display());
            Ok(())
        }
        Command::Analyze { dir } => {
            let rows = commands::analyze(&dir)?;
            println!("{}", commands::SUMMARY_HEADER.join(","));
            for r in rows {
                println!("{}", r.record().join(","));
            }
            Ok(())
        }
        Command::Plotdata { dir } => {
            let out = commands::plotdata(&dir)?;
            println!("{}", out.display());
            Ok(())
        }
        Command::Selftest { draws, seed } => commands::selftest(&mut std::io::stdout().lock(), draws, seed),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mrbv: {}", f.message());
            ExitCode::from(f.code() as u8)
        }
    }
}
