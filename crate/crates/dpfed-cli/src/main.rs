//! Command-line entry point for the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dpfed_cli::config::parse_config;
use dpfed_cli::error::{CliError, Result};
use dpfed_cli::plan::ExperimentPlan;
use dpfed_cli::{runner, sweep, verify};

#[derive(Parser)]
#[command(
    name = "dpfed",
    version,
    about = "Deterministic simulator for differentially private federated optimization"
)]
struct Cli {
    /// Master seeds overriding the config (comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Output directory overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread count (defaults to the machine's cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every (variant, seed) run a config describes.
    Run { config: PathBuf },
    /// Run the descent-inequality, geometric-sum, and operator suites.
    Verify {
        /// Optional config supplying the problem suite to verify on.
        config: Option<PathBuf>,
    },
    /// Evaluate the convergence bound for one recorded trace.
    Bounds { config: PathBuf, trace: PathBuf },
    /// Run a grid of configs, one nested plan per value.
    Sweep { config: PathBuf, grid: PathBuf },
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    match cli.command {
        Command::Run { config } => {
            let parsed = parse_config(&config)?;
            let plan = ExperimentPlan::new(parsed, cli.out, &cli.seed);
            let outcome = runner::run_plan(&plan)?;
            for run in &outcome.summary.runs {
                println!(
                    "{} seed {}: final suboptimality {:.6e} over {} rounds",
                    run.variant, run.seed, run.final_suboptimality, run.rounds
                );
            }
            for (variant, v) in &outcome.summary.variants {
                println!(
                    "{variant}: mean final suboptimality {:.6e} across {} seed(s)",
                    v.mean_final_suboptimality, v.seeds
                );
            }
            println!("wrote {}", outcome.summary_path.display());
            Ok(())
        }
        Command::Verify { config } => {
            let outcome = verify::run_verify(config.as_deref())?;
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.is_clean() {
                println!("verification clean: {} checks", outcome.total_checks);
                Ok(())
            } else {
                Err(CliError::Verification(format!(
                    "{} of {} checks failed",
                    outcome.violations, outcome.total_checks
                )))
            }
        }
        Command::Bounds { config, trace } => {
            let report = runner::bounds_command(&config, &trace)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Sweep { config, grid } => {
            let outcome = sweep::run_sweep(&config, &grid, cli.out, &cli.seed)?;
            for entry in &outcome.summary.entries {
                let finals = entry
                    .mean_final_suboptimality
                    .iter()
                    .map(|(variant, value)| format!("{variant} {value:.6e}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                println!("{} = {}: {finals}", outcome.summary.key, entry.value);
            }
            println!("wrote {}", outcome.summary_path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
