//! Command-line front end. Exit codes: 0 success, 2 configuration or usage,
//! 3 input data or I/O, 4 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use newsaffect::pipeline::{self, Command, Overrides, RunOptions};

#[derive(Parser)]
#[command(name = "newsaffect", version, about = "Emotion, moral and engagement analysis of news posts")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output root directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Score every post for emotions, sentiment and moral foundations.
    Score,
    /// Cluster hashtags into themes; with a merge map, label every post.
    Themes,
    /// Factorise the affect matrix and pick K at the elbow.
    Factors,
    /// Fit engagement and reply-sentiment regressions.
    Regress,
    /// Generate a synthetic corpus with planted truth.
    Synth,
    /// Corpus summary, conversation sizes and prevalence series.
    Report,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Score => Command::Score,
        Cmd::Themes => Command::Themes,
        Cmd::Factors => Command::Factors,
        Cmd::Regress => Command::Regress,
        Cmd::Synth => Command::Synth,
        Cmd::Report => Command::Report,
    };
    let opts = RunOptions {
        config: cli.config,
        overrides: Overrides {
            seed: cli.seed,
            output: cli.output,
        },
        threads: cli.threads,
    };
    match pipeline::run(command, &opts) {
        Ok(run) => {
            for (k, v) in &run.summary {
                println!("{k}: {v}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
