use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use bethe_transport::cli::{run, Mode, RunOptions, EXIT_INVALID};

/// Transport experiments for random Schrödinger operators on regular trees.
///
/// Exit status: 0 ok, 1 a check failed, 2 invalid configuration, 3 numeric abort.
#[derive(Debug, Parser)]
#[command(name = "bethe-transport", version)]
struct Args {
    /// green-validate, pool-run, phase-map, dynamics-run, hatp-run, bounds-check or theorem1-scan
    mode: String,
    /// TOML experiment file
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` from the file
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    threads: Option<usize>,
    /// Output root; results go to <out>/<mode>/ (default: $BETHE_TRANSPORT_OUT, then ./bethe-out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace an existing result directory
    #[arg(long)]
    force: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mode: Mode = match args.mode.parse() {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID as u8);
        }
    };
    let opts = RunOptions {
        config: args.config,
        seed: args.seed,
        threads: args.threads,
        out: args.out,
        force: args.force,
    };
    let outcome = run(mode, &opts);
    if let Some(dir) = &outcome.out_dir {
        eprintln!("results: {}", dir.display());
    }
    if let Some(msg) = &outcome.message {
        eprintln!("error: {msg}");
    }
    ExitCode::from(outcome.exit_code as u8)
}
