//! `densclf`: train, evaluate and visualize per-class density classifiers.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 training or fold failure.

mod commands;
mod config;
mod failure;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CvArgs, PlotArgs, PredictArgs, ToyArgs, TrainArgs};

#[derive(Parser)]
#[command(name = "densclf", version, about = "Classification by per-class density estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a two-moons or concentric-circles dataset as CSV.
    GenerateToy(ToyArgs),
    /// Fit a classifier and save it as a model record.
    Train(TrainArgs),
    /// Label rows of a CSV with a saved model.
    Predict(PredictArgs),
    /// Stratified k-fold evaluation with table and report output.
    CrossValidate(CvArgs),
    /// Render the decision regions of a two-feature model as SVG.
    PlotRegions(PlotArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenerateToy(a) => commands::generate_toy(&a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(&a),
        Command::CrossValidate(a) => commands::cross_validate_cmd(a),
        Command::PlotRegions(a) => commands::plot_regions(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
