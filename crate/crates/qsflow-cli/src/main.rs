//! `qsflow`: scenario-driven batch runner for quantum stochastic flow
//! computations. See `qsflow list` for built-in models and the repository
//! README for the scenario file format.

mod builtins;
mod input;
mod scenario;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "qsflow", version, about = "quantum stochastic flow scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its outputs and manifest.
    Run {
        scenario: PathBuf,
        /// Override the scenario's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List built-in models and presentations.
    List,
    /// Schema-check a scenario file without running it.
    Validate { scenario: PathBuf },
}

fn main() -> Result<()> {
    if let Ok(threads) = std::env::var("QSFLOW_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global()
                .ok();
        }
    }

    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, output } => {
            let sc = scenario::load(&scenario)?;
            let written = scenario::run(&sc, output.as_deref())?;
            for path in written {
                println!("{}", path.display());
            }
        }
        Command::List => {
            println!("{:<32} {:<13} description", "name", "kind");
            for entry in builtins::catalogue() {
                println!("{:<32} {:<13} {}", entry.name, entry.kind, entry.description);
            }
        }
        Command::Validate { scenario } => {
            let sc = scenario::load(&scenario)?;
            scenario::validate(&sc)?;
            println!("ok: {} scenario is well-formed", sc.kind);
        }
    }
    Ok(())
}
