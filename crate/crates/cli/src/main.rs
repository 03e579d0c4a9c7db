//! Pipeline executable: ingest results, fit an embedding, predict gaps,
//! place new entities, evaluate geometries, and export analysis tables.
//!
//! Stages hand off through files (database CSV -> embedding JSON ->
//! reports), so the expensive fit is cached on disk. Logs go to stderr;
//! data goes to files and stdout. Exit codes: 0 success, 1 runtime or data
//! error, 2 usage error.

mod commands;
mod manifest;
mod util;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "benchembed",
    version,
    about = "Embed benchmark models and tasks in a shared metric space and predict fine-tuning performance gaps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a results file; optionally aggregate duplicates and filter by degree
    Ingest(commands::ingest::IngestArgs),
    /// Normalize a database and fit the joint embedding
    Embed(commands::embed::EmbedArgs),
    /// Predict the normalized gap (and optionally the raw score) for one pair
    Predict(commands::predict::PredictArgs),
    /// Insert a new model or task into a frozen embedding from a few results
    Place(commands::place::PlaceArgs),
    /// Run the repeated-holdout evaluation protocol
    Eval(commands::eval::EvalArgs),
    /// Export quality, centrality, and 2D map artifacts
    Analyze(commands::analyze::AnalyzeArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(args) => commands::ingest::run(args),
        Command::Embed(args) => commands::embed::run(args),
        Command::Predict(args) => commands::predict::run(args),
        Command::Place(args) => commands::place::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Analyze(args) => commands::analyze::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
