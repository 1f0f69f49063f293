use std::process::ExitCode;

use clap::{Parser, Subcommand};
use texseg_cli::commands::{crossval, evaluate, segment, sweep, train};

#[derive(Parser)]
#[command(name = "texseg", version, about = "Scene segmentation with class-semantic color-texture textons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a texton dictionary from cropped class regions.
    Train(train::TrainArgs),
    /// Label an image or a directory of frames.
    Segment(segment::SegmentArgs),
    /// Score a dictionary on the images of a manifest.
    Evaluate(evaluate::EvaluateArgs),
    /// K-fold cross-validation on cropped regions.
    Crossval(crossval::CrossvalArgs),
    /// Accuracy and timing as one parameter varies.
    Sweep(sweep::SweepArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Train(a) => train::run(a).map(|_| true),
        Command::Segment(a) => segment::run(a).map(|s| s.failed.is_empty()),
        Command::Evaluate(a) => evaluate::run(a).map(|_| true),
        Command::Crossval(a) => crossval::run(a).map(|_| true),
        Command::Sweep(a) => sweep::run(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
