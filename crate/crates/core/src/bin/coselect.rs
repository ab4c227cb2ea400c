//! Command-line front end for joint feature and instance selection.
//!
//! Every subcommand reads a run config (`--config`, key = value lines) and
//! writes its artifacts under the configured output directory. Logging is
//! controlled by the `COSELECT_LOG` environment variable (`error`, `warn`,
//! `info`, `debug`, `trace`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coselect::cli::{self, Command as RunCommand, Overrides};
use coselect::eval::Classifier;
use coselect::solver::Variant;

#[derive(Parser)]
#[command(
    name = "coselect",
    version,
    about = "Joint feature and instance selection on multi-view data"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Run config file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for sweep/eval/ablate; 0 = runtime default.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Model variant: full, no-graph, or no-consensus.
    #[arg(long, global = true)]
    variant: Option<Variant>,

    /// Fraction of features to keep, in (0, 1].
    #[arg(long = "feature-ratio", global = true)]
    feature_ratio: Option<f64>,

    /// Fraction of instances to keep, in (0, 1].
    #[arg(long = "instance-ratio", global = true)]
    instance_ratio: Option<f64>,

    /// Downstream classifier: one-nn or nearest-centroid.
    #[arg(long, global = true)]
    classifier: Option<Classifier>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset and write it under <out>/dataset.
    Synth,
    /// Fit the model; writes trace.csv and model_summary.json.
    Fit,
    /// Fit, then rank and select; adds rankings and selection.json.
    Select,
    /// Fit, select, and score the held-out instances; adds eval reports.
    Eval,
    /// Evaluate every (feature_ratio, instance_ratio) grid cell.
    Sweep,
    /// Compare the full model against both reduced variants.
    Ablate,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("COSELECT_LOG", "warn"),
    )
    .format_timestamp(None)
    .init();

    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Synth => RunCommand::Synth,
        Cmd::Fit => RunCommand::Fit,
        Cmd::Select => RunCommand::Select,
        Cmd::Eval => RunCommand::Eval,
        Cmd::Sweep => RunCommand::Sweep,
        Cmd::Ablate => RunCommand::Ablate,
    };
    let Some(config) = cli.config else {
        eprintln!("error: --config <FILE> is required");
        return ExitCode::from(2);
    };
    let overrides = Overrides {
        out: cli.out,
        seed: cli.seed,
        jobs: cli.jobs,
        variant: cli.variant,
        feature_ratio: cli.feature_ratio,
        instance_ratio: cli.instance_ratio,
        classifier: cli.classifier,
    };
    match cli::run(command, &config, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::FAILURE
        }
    }
}
