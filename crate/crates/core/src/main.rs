use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cheaptalk::commands::{configure_threads, error_json, run, write_artifact};
use cheaptalk::config::{Command, ExperimentConfig, Overrides};

/// Cheap-talk persuasion with an excess audience.
///
/// Flags override fields of the config file. Exit status: 0 when every
/// declared check passes, 1 when a check fails, 2 on errors.
#[derive(Debug, Parser)]
#[command(name = "cheaptalk", version)]
struct Cli {
    /// Command to run; overrides `command` in the config.
    command: Option<Command>,
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    gamma0: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        command: cli.command,
        output: cli.out,
        seed: cli.seed,
        trials: cli.trials,
        resolution: cli.resolution,
        gamma0: cli.gamma0,
    };
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::default()),
    }
    .map(|c| c.apply(overrides));
    let result = config.and_then(|c| {
        configure_threads()?;
        let outcome = run(&c)?;
        write_artifact(c.output.as_deref(), &outcome.artifact)?;
        Ok((c, outcome))
    });
    match result {
        Ok((_, outcome)) if outcome.passed() => ExitCode::SUCCESS,
        Ok((c, outcome)) => {
            eprintln!(
                "{}",
                outcome.failures_json(c.command.expect("validated config has a command"))
            );
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{}", error_json(cli.command, &e));
            ExitCode::from(2)
        }
    }
}
