mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "rbmo", version, about = "Doubling filtrations and RBMO norms for discrete measures")]
struct Cli {
    /// JSON run configuration; defaults apply to every missing field.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fail when empirical ratio windows are missed.
    #[arg(long, global = true)]
    assert: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the measure and its growth estimate.
    GenMeasure,
    /// Build and check the selected filtrations, then save them.
    Build,
    /// Re-check saved filtrations, the cube lookup and the δ inequalities.
    Verify,
    /// Evaluate every norm on the configured test functions.
    Norms,
    /// Compare the norms and check the exact inequalities between them.
    Compare,
    /// Draw the atoms of one level with their balls as SVG (d = 2).
    Plot,
}

fn run(cli: Cli) -> rbmo_core::Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if let Some(w) = cfg.workers {
        // Fails only if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global();
    }
    match cli.command {
        Command::GenMeasure => commands::gen_measure(&cfg),
        Command::Build => commands::build(&cfg),
        Command::Verify => commands::verify(&cfg),
        Command::Norms => commands::norms(&cfg),
        Command::Compare => commands::compare(&cfg, cli.assert),
        Command::Plot => commands::plot(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some checks failed; see the reports");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
