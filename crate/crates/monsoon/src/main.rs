use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use monsoon::{cmd_analyze, cmd_evaluate, cmd_fit, cmd_simulate, cmd_synth, RunConfig, Summary};

#[derive(Parser)]
#[command(name = "monsoon", version, about = "Rainfall pattern discovery with a Markov random field")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed` in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `out_dir` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write a synthetic rainfall field with planted labels.
    Synth,
    /// Fit the model and write the MAP state, diagnostics and patterns.
    Fit,
    /// Transitions, spells, similarity and year classes of a fitted run.
    Analyze,
    /// Simulate seasons from a transition matrix and pattern file.
    Simulate,
    /// Compare baseline clusterings with the fitted model.
    Evaluate,
}

fn run(cli: &Cli) -> Result<Summary> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    match cli.command {
        Command::Synth => cmd_synth(&config),
        Command::Fit => cmd_fit(&config),
        Command::Analyze => cmd_analyze(&config),
        Command::Simulate => cmd_simulate(&config),
        Command::Evaluate => cmd_evaluate(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            // a closed pipe (e.g. `| head`) is not a failure
            let mut out = std::io::stdout().lock();
            let _ = summary
                .entries
                .iter()
                .try_for_each(|(k, v)| writeln!(out, "{k}={v}"))
                .and_then(|()| summary.files.iter().try_for_each(|f| writeln!(out, "wrote {}", f.display())));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
