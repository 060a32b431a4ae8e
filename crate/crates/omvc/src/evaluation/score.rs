//! Scoring a finished run against ground-truth labels.

use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evaluation::kmeans::kmeans_restarts;
use crate::evaluation::metrics::{accuracy, nmi};
use crate::pipeline::RunReport;

/// Agreement between extracted clusters and ground truth, aggregated
/// over repeated k-means runs from random initializations.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub restarts: usize,
    /// Normalized mutual information of each restart's labeling, in order.
    pub nmi_per_restart: Vec<f64>,
    /// Matching accuracy of each restart's labeling, in order.
    pub ac_per_restart: Vec<f64>,
    pub nmi_mean: f64,
    /// Population standard deviation over restarts.
    pub nmi_std: f64,
    pub ac_mean: f64,
    pub ac_std: f64,
}

impl ScoreReport {
    /// Deterministic line-oriented rendering (`key value` per line) for
    /// writing next to a run's loss trace.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("restarts {}\n", self.restarts));
        out.push_str(&format!("nmi_mean {:.17}\n", self.nmi_mean));
        out.push_str(&format!("nmi_std {:.17}\n", self.nmi_std));
        out.push_str(&format!("ac_mean {:.17}\n", self.ac_mean));
        out.push_str(&format!("ac_std {:.17}\n", self.ac_std));
        for (r, (n, a)) in self.nmi_per_restart.iter().zip(&self.ac_per_restart).enumerate() {
            out.push_str(&format!("restart {} nmi {:.17} ac {:.17}\n", r, n, a));
        }
        out
    }
}

/// Cluster the rows of a consensus matrix `restarts` times and score
/// every labeling against `labels`; the restarts share one seeded
/// generator, so the whole report is deterministic in `seed`.
pub fn score_consensus(
    points: ArrayView2<'_, f64>,
    labels: &[usize],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<ScoreReport> {
    if labels.len() != points.nrows() {
        return Err(Error::Dimension(format!(
            "{} labels for {} consensus rows",
            labels.len(),
            points.nrows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcomes = kmeans_restarts(points, k, restarts, &mut rng)?;
    let mut nmi_per_restart = Vec::with_capacity(restarts);
    let mut ac_per_restart = Vec::with_capacity(restarts);
    for outcome in &outcomes {
        nmi_per_restart.push(nmi(&outcome.assignments, labels)?);
        ac_per_restart.push(accuracy(&outcome.assignments, labels)?);
    }
    let (nmi_mean, nmi_std) = mean_std(&nmi_per_restart);
    let (ac_mean, ac_std) = mean_std(&ac_per_restart);
    Ok(ScoreReport {
        restarts,
        nmi_per_restart,
        ac_per_restart,
        nmi_mean,
        nmi_std,
        ac_mean,
        ac_std,
    })
}

/// Score a run's stored consensus rows against the dataset's labels.
/// Labels are required; runs on unlabeled data cannot be scored.
pub fn score_run(
    report: &mut RunReport,
    labels: Option<&[usize]>,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<ScoreReport> {
    let labels = labels.ok_or_else(|| {
        Error::InvalidValue("scoring needs ground-truth labels, none are present".into())
    })?;
    let points = report.consensus.to_array()?;
    score_consensus(points.view(), labels, k, restarts, seed)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
