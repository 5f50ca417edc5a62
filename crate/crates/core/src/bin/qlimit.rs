use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qlimit::runner::{run_path, RunOptions};

#[derive(Parser)]
#[command(name = "qlimit", version, about = "Run classical-limit experiments from a JSON config")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks of a config, writing CSV tables and summary.json
    Run {
        config: PathBuf,
        /// output directory (overrides the config)
        #[arg(long)]
        out: Option<PathBuf>,
        /// seed for randomized batteries (overrides the config)
        #[arg(long)]
        seed: Option<u64>,
        /// worker threads
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.command {
        Command::Run { config, out, seed, jobs } => {
            let status = run_path(&config, &RunOptions { out, seed, jobs });
            ExitCode::from(status as u8)
        }
    }
}
