//! Persistent factor state and the per-chunk working factors.

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::ChunkBatch;
use crate::error::{Error, Result};

/// Per-view persistent state: the basis and the compressed history.
///
/// `accum_a` and `accum_b` are running sums over every processed chunk of
/// the latent Gram and cross terms; together with `hist_const` they
/// reproduce the full-history basis objective without re-reading data:
/// sum over chunks of the weighted squared fit error equals
/// `tr(U A Uᵀ) − 2⟨U, B⟩ + hist_const` for any basis `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewFactor {
    /// `dim x k`, elementwise non-negative.
    pub basis: Array2<f64>,
    /// `k x k` symmetric positive semidefinite accumulator.
    pub accum_a: Array2<f64>,
    /// `dim x k` non-negative accumulator.
    pub accum_b: Array2<f64>,
    /// Sum of weighted squared column norms of all accumulated chunks.
    pub hist_const: f64,
}

impl ViewFactor {
    fn new(dim: usize, k: usize) -> ViewFactor {
        ViewFactor {
            basis: Array2::zeros((dim, k)),
            accum_a: Array2::zeros((k, k)),
            accum_b: Array2::zeros((dim, k)),
            hist_const: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }
}

/// Everything the solver carries from one chunk to the next (and across
/// passes): per-view bases and accumulators plus the run's single random
/// generator. Memory is independent of how many instances were processed.
#[derive(Debug, Clone)]
pub struct FactorState {
    pub views: Vec<ViewFactor>,
    pub k: usize,
    /// All randomness in a run flows from this one seeded generator.
    pub rng: ChaCha8Rng,
    /// 1-based index of the pass currently being processed.
    pub pass_index: usize,
    /// Set once the first chunk has drawn the initial factors.
    pub initialized: bool,
    /// Guard against accumulating the same chunk twice: (pass, chunk).
    last_accumulated: Option<(usize, usize)>,
}

impl FactorState {
    pub fn new(dims: &[usize], k: usize, seed: u64) -> FactorState {
        FactorState {
            views: dims.iter().map(|&d| ViewFactor::new(d, k)).collect(),
            k,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pass_index: 1,
            initialized: false,
            last_accumulated: None,
        }
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(|v| v.dim()).collect()
    }

    pub(crate) fn last_accumulated(&self) -> Option<(usize, usize)> {
        self.last_accumulated
    }

    pub(crate) fn set_last_accumulated(&mut self, key: Option<(usize, usize)>) {
        self.last_accumulated = key;
    }

    /// Bytes held by the persistent factor state.
    pub fn memory_bytes(&self) -> usize {
        let f = std::mem::size_of::<f64>();
        self.views
            .iter()
            .map(|v| (v.basis.len() + v.accum_a.len() + v.accum_b.len() + 1) * f)
            .sum()
    }

    /// Fold a finished chunk into the history. Must be called exactly once
    /// per chunk, after the chunk's alternation has converged, so the
    /// accumulators always reflect the final latent factors.
    pub fn accumulate(&mut self, chunk: &ChunkBatch, factors: &ChunkFactors) -> Result<()> {
        let key = (self.pass_index, chunk.chunk_index);
        if self.last_accumulated == Some(key) {
            return Err(Error::InvalidValue(format!(
                "chunk {} of pass {} accumulated twice",
                chunk.chunk_index, self.pass_index
            )));
        }
        for (v, vf) in self.views.iter_mut().enumerate() {
            let latent = &factors.latents[v];
            let wtilde = &factors.wtilde[v];
            let filled = &chunk.views[v].filled;

            // Rows of the latent scaled by the squared weights.
            let weighted_latent = latent * &wtilde.view().insert_axis(Axis(1));
            vf.accum_a = &vf.accum_a + &latent.t().dot(&weighted_latent);
            vf.accum_b = &vf.accum_b + &filled.dot(&weighted_latent);
            for (i, col) in filled.axis_iter(Axis(1)).enumerate() {
                vf.hist_const += wtilde[i] * col.iter().map(|x| x * x).sum::<f64>();
            }
        }
        self.last_accumulated = Some(key);
        Ok(())
    }
}

/// The factors produced for one chunk: per-view latent representations,
/// the shared consensus, and the squared instance weights they were fit
/// under.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkFactors {
    /// Per view: `size x k`, non-negative.
    pub latents: Vec<Array2<f64>>,
    /// `size x k`, non-negative; the clustering embedding for this chunk.
    pub consensus: Array2<f64>,
    /// Per view: squared per-instance weights (diagonal of W̃).
    pub wtilde: Vec<Array1<f64>>,
}

impl ChunkFactors {
    /// Squared weights for every view of a chunk.
    pub fn wtilde_of(chunk: &ChunkBatch) -> Vec<Array1<f64>> {
        chunk
            .views
            .iter()
            .map(|cv| cv.weights.mapv(|w| w * w))
            .collect()
    }

    pub fn size(&self) -> usize {
        self.consensus.nrows()
    }

    pub fn memory_bytes(&self) -> usize {
        let f = std::mem::size_of::<f64>();
        let latents: usize = self.latents.iter().map(|l| l.len()).sum();
        let wt: usize = self.wtilde.iter().map(|w| w.len()).sum();
        (latents + self.consensus.len() + wt) * f
    }
}
