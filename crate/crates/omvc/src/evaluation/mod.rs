//! Cluster extraction from consensus rows and agreement scoring.

pub mod kmeans;
pub mod metrics;
pub mod score;

pub use kmeans::{kmeans, ClusteringResult};
pub use metrics::{accuracy, nmi};
pub use score::{score_consensus, score_run, ScoreReport};
