use std::path::PathBuf;

use clap::{Parser, Subcommand};
use dcprox_cli::{cmd_check, cmd_compare, cmd_rates, cmd_run, GlobalOpts};

#[derive(Parser)]
#[command(name = "dcprox", version, about = "Proximal solvers for difference-of-convex programs")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Override the problem seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured solver and write its trace and report.
    Run { config: PathBuf },
    /// Run every configured solver from the same start and compare them.
    Compare { config: PathBuf },
    /// Re-verify a stored trace against its problem config.
    Check {
        trace: PathBuf,
        #[arg(long)]
        problem: PathBuf,
    },
    /// Classify the convergence rate of a stored trace.
    Rates {
        trace: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        fstar: Option<f64>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let opts = GlobalOpts {
        quiet: cli.quiet,
        seed: cli.seed,
    };
    let code = match &cli.command {
        Command::Run { config } => cmd_run(config, &opts),
        Command::Compare { config } => cmd_compare(config, &opts),
        Command::Check { trace, problem } => cmd_check(trace, problem, &opts),
        Command::Rates { trace, fstar } => cmd_rates(trace, *fstar, &opts),
    };
    std::process::exit(code);
}
