use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use grassmpc_harness::commands::{cmd_benchmark, cmd_design, cmd_generate, cmd_selftest};
use grassmpc_harness::{ExperimentConfig, Result};

#[derive(Parser)]
#[command(
    name = "grassmpc",
    version,
    about = "Reduced-order MPC with subspaces designed on the Grassmann manifold"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (.toml or .json).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for inputs and outputs.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Sample states and solve the full-order problem at each.
    Generate(Common),
    /// Fit the offset, design the subspace and certify initial admissibility.
    Design(Common),
    /// Compare reduced and full-order closed loops on a grid.
    Benchmark(Common),
    /// Run the invariant checks.
    Selftest(Common),
}

fn run(cli: Cli) -> Result<()> {
    let (Command::Generate(c) | Command::Design(c) | Command::Benchmark(c) | Command::Selftest(c)) =
        &cli.command;
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Generate(_) => println!("{}", cmd_generate(&cfg, &c.out)?),
        Command::Design(_) => println!("{}", cmd_design(&cfg, &c.out)?),
        Command::Benchmark(_) => {
            let r = cmd_benchmark(&cfg, &c.out)?;
            println!(
                "{} grid points ({} skipped): mean eps {:.4}%, std {:.4}%, max {:.4}%",
                r.points.len(),
                r.skipped,
                100.0 * r.mean_epsilon,
                100.0 * r.std_epsilon,
                100.0 * r.max_epsilon
            );
        }
        Command::Selftest(_) => {
            for r in cmd_selftest(&cfg, &c.out)? {
                println!("ok   {:<10} {}", r.name, r.detail);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
