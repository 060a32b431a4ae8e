//! Score a finished run's consensus embedding against ground-truth labels.

use std::collections::BTreeSet;
use std::path::PathBuf;

use crate::cli::run_cmd::read_consensus;
use crate::dataset::MultiViewSource;
use crate::error::{Error, Result};
use crate::evaluation::{score_consensus, ScoreReport};

/// Inputs of the `evaluate` subcommand.
#[derive(Debug, Clone)]
pub struct EvaluateCommand {
    /// Directory holding `consensus.txt` from a finished run.
    pub run_dir: PathBuf,
    /// Dataset manifest; must reference a labels file.
    pub manifest: PathBuf,
    /// Cluster count for the scoring step; defaults to the number of
    /// distinct labels.
    pub clusters: Option<usize>,
    pub restarts: usize,
    pub seed: u64,
}

/// Cluster the stored consensus `restarts` times, score each labeling,
/// and write the report to `scores.txt` in the run directory. Returns
/// the report so callers can use the numbers directly.
pub fn cmd_evaluate(cmd: &EvaluateCommand) -> Result<ScoreReport> {
    let consensus = read_consensus(&cmd.run_dir.join("consensus.txt"))?;
    let source = MultiViewSource::open(&cmd.manifest)?;
    let labels = source.labels().ok_or_else(|| {
        Error::Config(format!(
            "manifest {} has no labels file; evaluation needs ground truth",
            cmd.manifest.display()
        ))
    })?;
    let k = match cmd.clusters {
        Some(k) => k,
        None => labels.iter().collect::<BTreeSet<_>>().len(),
    };
    let report = score_consensus(consensus.view(), labels, k, cmd.restarts, cmd.seed)?;

    let scores_path = cmd.run_dir.join("scores.txt");
    let text = format!("format 1\n{}", report.to_text());
    std::fs::write(&scores_path, text).map_err(|e| Error::io(&scores_path, e))?;
    Ok(report)
}
