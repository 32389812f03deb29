//! Command-line front end for `spectral-relax`: argument and config handling,
//! input loading, the per-command pipelines, and CSV/JSON emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod input;
pub mod output;

use config::{RunConfig, Task};
use error::CliResult;
use output::Output;

/// Runs a resolved configuration and returns what it would emit.
pub fn execute(config: &RunConfig) -> CliResult<Output> {
    if let Task::Hypercube { n, alphas } = &config.task {
        return commands::hypercube(*n, alphas);
    }
    let source = config
        .source
        .as_ref()
        .ok_or_else(|| error::CliError::Config("one of --input or --preset is required".into()))?;
    let input = input::load(source, &config.tolerances, config.seed)?;
    match &config.task {
        Task::Analyze => commands::analyze(&input, &config.tolerances),
        Task::Simulate { horizon } => commands::simulate(&input, *horizon),
        Task::Rigidity { deltas } => commands::rigidity(&input, deltas),
        Task::Thermo { horizon, modes_at } => commands::thermo(&input, *horizon, modes_at),
        Task::Power {
            epsilon,
            tau,
            stopping,
            max_iter,
        } => commands::power(&input, *epsilon, *tau, *stopping, *max_iter),
        Task::Accel {
            degree,
            plan,
            compare_plain,
            rounds,
        } => commands::accel(&input, *degree, plan, *compare_plain, *rounds),
        Task::Fpt { target, start, kmax } => commands::fpt(&input, *target, start, *kmax),
        Task::Hypercube { .. } => unreachable!("handled above"),
    }
}

/// Resolves, runs and writes.
pub fn run(cli: &config::Cli) -> CliResult<()> {
    let config = RunConfig::resolve(cli)?;
    let output = execute(&config)?;
    output.emit(config.format, config.out.as_deref())
}
