//! Cumulative average loss over a pass.
//!
//! After each chunk converges, its fit, consensus-disagreement and
//! sparsity terms are recorded once and never re-evaluated under later
//! bases — recomputing them would require re-reading the stream. The
//! reported value after chunk `t` is the sum of all recorded terms divided
//! by `min(s·t, N)`, the number of instances actually seen.

use crate::dataset::ChunkBatch;
use crate::error::{Error, Result};
use crate::factorization::config::SolverConfig;
use crate::factorization::objective::{consensus_term, fit_term, l1_term};
use crate::factorization::state::{ChunkFactors, FactorState};

#[derive(Debug, Clone)]
pub struct LossTracker {
    /// Nominal chunk size s (the last chunk may deliver fewer).
    chunk_size: usize,
    /// Total instances in the dataset.
    n_instances: usize,
    /// Per-chunk recorded sums, in order.
    chunk_sums: Vec<f64>,
    running_sum: f64,
}

impl LossTracker {
    pub fn new(chunk_size: usize, n_instances: usize) -> LossTracker {
        LossTracker {
            chunk_size,
            n_instances,
            chunk_sums: Vec::new(),
            running_sum: 0.0,
        }
    }

    /// Record a finished chunk's loss terms, frozen at their values under
    /// the bases current when the chunk completed.
    pub fn record_chunk(
        &mut self,
        state: &FactorState,
        chunk: &ChunkBatch,
        factors: &ChunkFactors,
        config: &SolverConfig,
    ) {
        let mut sum = 0.0;
        for (v, vf) in state.views.iter().enumerate() {
            let fit = fit_term(
                &chunk.views[v].filled,
                &vf.basis,
                &factors.latents[v],
                &factors.wtilde[v],
            );
            let agree = consensus_term(&factors.latents[v], &factors.consensus, &factors.wtilde[v]);
            sum += fit + config.alpha[v] * agree + config.beta[v] * l1_term(&factors.latents[v]);
        }
        self.record_sum(sum);
    }

    /// Record an already-evaluated per-chunk sum.
    pub fn record_sum(&mut self, sum: f64) {
        self.running_sum += sum;
        self.chunk_sums.push(sum);
    }

    pub fn chunks_recorded(&self) -> usize {
        self.chunk_sums.len()
    }

    /// Recorded per-chunk sums in stream order (for serialization).
    pub fn chunk_sums(&self) -> &[f64] {
        &self.chunk_sums
    }

    /// Average loss after `t` chunks: cumulative recorded terms divided by
    /// `min(s·t, N)`.
    pub fn average_loss(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.chunk_sums.len() {
            return Err(Error::InvalidValue(format!(
                "average loss defined for 1..={} recorded chunks, asked for {}",
                self.chunk_sums.len(),
                t
            )));
        }
        let covered = (self.chunk_size * t).min(self.n_instances);
        let sum: f64 = self.chunk_sums[..t].iter().sum();
        Ok(sum / covered as f64)
    }

    /// Average loss over everything recorded so far.
    pub fn current(&self) -> Result<f64> {
        self.average_loss(self.chunks_recorded())
    }
}
