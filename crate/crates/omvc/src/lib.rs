//! Online multi-view clustering for incomplete data.
//!
//! This crate streams multi-view datasets in fixed-size chunks and fits a
//! joint nonnegative matrix factorization online: each view keeps its own
//! basis while the chunk's latent representations are pulled toward a
//! shared consensus that serves as the clustering embedding. Missing
//! instances are mean-filled and down-weighted instead of dropped, so
//! incomplete views still contribute. Past chunks are remembered through
//! two small accumulator matrices per view, keeping memory independent of
//! the number of instances processed.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod factorization;
pub mod linalg;
pub mod pipeline;

pub use error::{Error, Result};
