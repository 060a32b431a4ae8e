//! Command-line front end: dataset generation, corruption, streaming
//! runs, and evaluation.

pub mod config;
pub mod corrupt;
pub mod evaluate;
pub mod generate;
pub mod run_cmd;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;
pub use config::{ExperimentConfig, PerView, SolverSection};
pub use corrupt::corrupt_dataset;
pub use evaluate::{cmd_evaluate, EvaluateCommand};
pub use generate::{write_synthetic_dataset, PlantedFactors, SyntheticSpec};
pub use run_cmd::{cmd_run, read_consensus, resolve_output_dir, RunCommand, OUT_DIR_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "omvc",
    version,
    about = "Streaming multi-view clustering over incomplete views"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic labeled multi-view dataset.
    Generate(GenerateArgs),
    /// Copy a complete dataset with a simulated missing-instance pattern.
    Corrupt(CorruptArgs),
    /// Execute the streaming factorization described by a config file.
    Run(RunArgs),
    /// Cluster a finished run's consensus and score it against labels.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of planted clusters.
    #[arg(long)]
    pub clusters: usize,
    /// Instances per cluster (total N = clusters * per-cluster).
    #[arg(long)]
    pub per_cluster: usize,
    /// Feature dimension of each view, comma separated; one view per entry.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub dims: Vec<usize>,
    /// Amplitude of non-negative uniform noise (0 keeps views exactly low rank).
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for manifest, views and labels.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    /// Manifest of the complete source dataset.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Fraction of instances removed from each view, in [0, 1).
    #[arg(long)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for the corrupted copy.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config file (TOML).
    pub config: PathBuf,
    /// Override the output directory from config or environment.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume_from: Option<PathBuf>,
    /// Stop after this many chunks to simulate an interruption.
    #[arg(long)]
    pub stop_after_chunks: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory holding consensus.txt from a finished run.
    #[arg(long)]
    pub run_dir: PathBuf,
    /// Dataset manifest with a labels file.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Cluster count; defaults to the number of distinct labels.
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Independent clustering restarts to score.
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Dispatch a parsed command line. Progress goes to stdout; all real
/// results are files, so scripting against the outputs stays stable.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => {
            let spec = SyntheticSpec {
                clusters: args.clusters,
                per_cluster: args.per_cluster,
                n_views: args.dims.len(),
                dims: args.dims,
                noise: args.noise,
                seed: args.seed,
            };
            write_synthetic_dataset(&spec, &args.out)?;
            println!(
                "wrote {} instances across {} views to {}",
                spec.n_instances(),
                spec.n_views,
                args.out.display()
            );
        }
        Command::Corrupt(args) => {
            corrupt_dataset(&args.manifest, args.rate, args.seed, &args.out)?;
            println!("wrote corrupted copy to {}", args.out.display());
        }
        Command::Run(args) => {
            let out_dir = cmd_run(&RunCommand {
                config_path: args.config,
                out_override: args.out,
                resume_from: args.resume_from,
                stop_after_chunks: args.stop_after_chunks,
            })?;
            println!("run artifacts in {}", out_dir.display());
        }
        Command::Evaluate(args) => {
            let report = cmd_evaluate(&EvaluateCommand {
                run_dir: args.run_dir.clone(),
                manifest: args.manifest,
                clusters: args.clusters,
                restarts: args.restarts,
                seed: args.seed,
            })?;
            println!(
                "nmi {:.4} +/- {:.4}, accuracy {:.4} +/- {:.4} over {} restarts ({})",
                report.nmi_mean,
                report.nmi_std,
                report.ac_mean,
                report.ac_std,
                report.restarts,
                args.run_dir.join("scores.txt").display()
            );
        }
    }
    Ok(())
}
