use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lqmfg_cli::{preset, run_with_threads, CliError, ExperimentKind, ScenarioConfig};

/// Solve and simulate linear-quadratic mean-field games with common noise.
///
/// Either `--config` (a JSON scenario file) or `--preset` selects the model;
/// the remaining flags override fields of the scenario. Set MFG_THREADS to
/// bound the worker pool.
#[derive(Debug, Parser)]
#[command(name = "lqmfg", version)]
struct Args {
    /// Scenario file (JSON).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Built-in scenario: netsec-closed-form or netsec-numeric.
    #[arg(long)]
    preset: Option<String>,

    /// Experiment to run: solve, simulate, rate_state, rate_cost or deviation.
    #[arg(long)]
    kind: Option<ExperimentKind>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// Number of time steps.
    #[arg(long)]
    steps: Option<usize>,

    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

fn threads() -> Result<Option<usize>, CliError> {
    match std::env::var("MFG_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("MFG_THREADS must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn main_inner(args: Args) -> Result<(), CliError> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => ScenarioConfig::load(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(CliError::Usage("one of --config or --preset is required".into())),
    };
    if let Some(kind) = args.kind {
        config.experiment.kind = kind;
    }
    if let Some(out) = args.out {
        config.output.dir = out;
    }
    if let Some(seed) = args.seed {
        config.experiment.seed = seed;
    }
    if let Some(steps) = args.steps {
        config.solver.steps = Some(steps);
    }
    let summary = run_with_threads(&config, threads()?)?;
    if !args.quiet {
        println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            match e {
                CliError::Usage(_) | CliError::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
