mod bases;
mod config;
mod eval;
mod manifest;
mod predict;
mod synth;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use egoloc::ErrorCategory;

/// Predict where a depth-camera wearer will walk.
#[derive(Parser)]
#[command(name = "egoloc", version)]
struct Cli {
    /// TOML file with one table per subcommand ([synth], [train], ...).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate simulated worlds, walks and depth frames.
    Synth(synth::Args),
    /// Build a training database from a dataset.
    Train(train::Args),
    /// Predict trajectories and occluded space for one depth frame.
    Predict(predict::Args),
    /// Precision and detection benchmarks on a held-out dataset.
    Eval(eval::Args),
    /// Reconstruction error of PCA and DCT bases against basis size.
    Bases(bases::Args),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<egoloc::Error>() {
            return match e.category() {
                ErrorCategory::Input => 2,
                ErrorCategory::Geometry => 3,
                ErrorCategory::EmptyBin => 4,
                ErrorCategory::Other => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = cli.config.as_deref();
    let result = match cli.command {
        Command::Synth(a) => synth::run(a, file),
        Command::Train(a) => train::run(a, file),
        Command::Predict(a) => predict::run(a, file),
        Command::Eval(a) => eval::run(a, file),
        Command::Bases(a) => bases::run(a, file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
