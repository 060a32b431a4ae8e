//! Chunked streaming over a multi-view dataset with dynamic mean-filling.
//!
//! Missing instances are filled with the running per-view mean of everything
//! observed so far and weighted by the fraction of the prefix that was
//! present, so a column filled early (from little evidence) counts for less
//! than one filled late. From the second pass over the data onward the
//! per-view statistics are frozen at their full-dataset values, which makes
//! fills and weights for the same instance identical across later passes.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};

use crate::dataset::indicator::IndicatorMatrix;
use crate::dataset::manifest::{load_labels, Manifest, Storage};
use crate::dataset::matrix_io::{
    validate_dense, validate_sparse, DenseReader, SparseReader, ViewReader,
};
use crate::error::{Error, Result};

/// Weight given to a missing instance when its view has no observations yet,
/// making the zero-filled placeholder all but invisible to the solver.
pub const COLD_START_WEIGHT: f64 = 1e-6;

/// Running sufficient statistics for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewStats {
    /// Number of observed (present) instances so far.
    pub count: u64,
    /// Elementwise sum of the observed columns.
    pub feature_sum: Array1<f64>,
}

impl ViewStats {
    pub fn mean(&self) -> Option<Array1<f64>> {
        (self.count > 0).then(|| &self.feature_sum / self.count as f64)
    }
}

/// Per-view statistics plus the stream position they reflect.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningViewStats {
    /// Instances consumed so far (present or not).
    pub instances_seen: u64,
    pub views: Vec<ViewStats>,
}

impl RunningViewStats {
    pub fn new(dims: &[usize]) -> RunningViewStats {
        RunningViewStats {
            instances_seen: 0,
            views: dims
                .iter()
                .map(|&d| ViewStats {
                    count: 0,
                    feature_sum: Array1::zeros(d),
                })
                .collect(),
        }
    }

    pub fn memory_bytes(&self) -> usize {
        self.views
            .iter()
            .map(|v| v.feature_sum.len() * std::mem::size_of::<f64>() + 16)
            .sum::<usize>()
    }
}

/// One view's slice of a chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkView {
    /// `dim x size` observed columns; zero where absent.
    pub raw: Array2<f64>,
    /// 1 where the instance was observed in this view.
    pub presence: Vec<u8>,
    /// `dim x size`, equal to `raw` where present, mean-filled elsewhere.
    pub filled: Array2<f64>,
    /// Per-instance weights in (0, 1]; exactly 1 where present.
    pub weights: Array1<f64>,
}

/// A block of consecutive instances across every view.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkBatch {
    /// 1-based position of this chunk in the stream.
    pub chunk_index: usize,
    /// 0-based global index of the first instance in the chunk.
    pub start: usize,
    /// Actual instance count (the final chunk may be short).
    pub size: usize,
    pub views: Vec<ChunkView>,
    /// Missing instances encountered before their view had any observation.
    pub cold_starts: usize,
}

impl ChunkBatch {
    pub fn memory_bytes(&self) -> usize {
        let f = std::mem::size_of::<f64>();
        self.views
            .iter()
            .map(|v| (v.raw.len() + v.filled.len() + v.weights.len()) * f + v.presence.len())
            .sum::<usize>()
    }
}

/// An opened dataset: validated manifest, per-view readers, indicator and
/// optional ground-truth labels.
pub struct MultiViewSource {
    manifest: Manifest,
    base: PathBuf,
    readers: Vec<ViewReader>,
    indicator: IndicatorMatrix,
    labels: Option<Vec<usize>>,
    /// Next global instance index to deliver.
    position: usize,
    chunks_emitted: usize,
}

impl MultiViewSource {
    /// Open and fully validate a dataset. Every view file is scanned once
    /// (bounded memory) to check instance counts, dimensions and value
    /// ranges before any chunk is served.
    pub fn open(manifest_path: &Path) -> Result<MultiViewSource> {
        let manifest = Manifest::load(manifest_path)?;
        let base = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Self::from_manifest(manifest, &base)
    }

    pub fn from_manifest(manifest: Manifest, base: &Path) -> Result<MultiViewSource> {
        let n = manifest.n_instances;
        let mut readers = Vec::with_capacity(manifest.views.len());
        for view in &manifest.views {
            let path = Manifest::resolve(base, &view.path);
            match view.storage {
                Storage::DenseText => {
                    validate_dense(&path, view.dim, n, view.scale)?;
                    readers.push(ViewReader::Dense(DenseReader::open(&path, view.dim, view.scale)?));
                }
                Storage::SparseCoordinate => {
                    validate_sparse(&path, view.dim, n, view.scale)?;
                    readers.push(ViewReader::Sparse(SparseReader::open(
                        &path, view.dim, n, view.scale,
                    )?));
                }
            }
        }
        let indicator = match &manifest.indicator {
            Some(rel) => IndicatorMatrix::load(&Manifest::resolve(base, rel), n, manifest.n_views)?,
            None => IndicatorMatrix::all_present(n, manifest.n_views),
        };
        let labels = match &manifest.labels {
            Some(rel) => Some(load_labels(&Manifest::resolve(base, rel), n)?),
            None => None,
        };
        Ok(MultiViewSource {
            manifest,
            base: base.to_path_buf(),
            readers,
            indicator,
            labels,
            position: 0,
            chunks_emitted: 0,
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn base_dir(&self) -> &Path {
        &self.base
    }

    pub fn n_instances(&self) -> usize {
        self.manifest.n_instances
    }

    pub fn n_views(&self) -> usize {
        self.manifest.n_views
    }

    pub fn dims(&self) -> Vec<usize> {
        self.manifest.views.iter().map(|v| v.dim).collect()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn indicator(&self) -> &IndicatorMatrix {
        &self.indicator
    }

    /// Replace the presence pattern, e.g. with a simulated one; the files
    /// on disk are untouched and masked/filled at read time instead.
    pub fn set_indicator(&mut self, indicator: IndicatorMatrix) -> Result<()> {
        if indicator.n() != self.n_instances() || indicator.n_views() != self.n_views() {
            return Err(Error::Dimension(format!(
                "indicator is {} x {}, dataset needs {} x {}",
                indicator.n(),
                indicator.n_views(),
                self.n_instances(),
                self.n_views()
            )));
        }
        self.indicator = indicator;
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.indicator.is_complete()
    }

    pub fn incompleteness_rates(&self) -> Vec<f64> {
        self.indicator.incompleteness_rates()
    }

    /// Fresh zeroed statistics shaped for this dataset.
    pub fn fresh_stats(&self) -> RunningViewStats {
        RunningViewStats::new(&self.dims())
    }

    /// Restart the stream from the first instance.
    pub fn rewind(&mut self) -> Result<()> {
        for r in &mut self.readers {
            r.rewind()?;
        }
        self.position = 0;
        self.chunks_emitted = 0;
        Ok(())
    }

    /// Fast-forward past `chunks` chunks of `chunk_size` without touching
    /// any statistics; used when resuming from a checkpoint.
    pub fn skip_chunks(&mut self, chunk_size: usize, chunks: usize) -> Result<()> {
        if chunk_size == 0 {
            return Err(Error::InvalidValue("chunk size must be at least 1".into()));
        }
        for _ in 0..chunks {
            let remaining = self.n_instances() - self.position;
            let take = chunk_size.min(remaining);
            if take == 0 {
                return Err(Error::InvalidValue(format!(
                    "cannot skip {} chunks: stream ends after {}",
                    chunks, self.chunks_emitted
                )));
            }
            for r in &mut self.readers {
                r.skip_columns(take)?;
            }
            self.position += take;
            self.chunks_emitted += 1;
        }
        Ok(())
    }

    /// Deliver the next chunk, filling and weighting missing instances.
    ///
    /// With `frozen_stats = false` (first pass), `stats` is advanced
    /// instance-by-instance so that an instance's fill and weight reflect
    /// everything strictly before it, even inside its own chunk. With
    /// `frozen_stats = true` (later passes), `stats` is read-only: fills use
    /// the full-dataset view means and each missing weight is the view's
    /// overall observed fraction.
    pub fn next_chunk(
        &mut self,
        stats: &mut RunningViewStats,
        chunk_size: usize,
        frozen_stats: bool,
    ) -> Result<Option<ChunkBatch>> {
        if chunk_size == 0 {
            return Err(Error::InvalidValue("chunk size must be at least 1".into()));
        }
        if stats.views.len() != self.n_views() {
            return Err(Error::Dimension(format!(
                "stats cover {} views, dataset has {}",
                stats.views.len(),
                self.n_views()
            )));
        }
        let n = self.n_instances();
        if self.position >= n {
            return Ok(None);
        }
        if frozen_stats {
            debug_assert_eq!(
                stats.instances_seen as usize, n,
                "frozen statistics must cover the whole dataset"
            );
        } else {
            debug_assert_eq!(
                stats.instances_seen as usize, self.position,
                "statistics out of step with the stream position"
            );
        }
        let size = chunk_size.min(n - self.position);

        let mut views: Vec<ChunkView> = Vec::with_capacity(self.readers.len());
        for reader in &mut self.readers {
            let raw = reader.read_columns(size)?;
            let filled = raw.clone();
            views.push(ChunkView {
                raw,
                presence: vec![0; size],
                filled,
                weights: Array1::ones(size),
            });
        }

        let mut cold_starts = 0usize;
        for local in 0..size {
            let global = self.position + local;
            for (v, view) in views.iter_mut().enumerate() {
                if self.indicator.present(global, v) {
                    view.presence[local] = 1;
                    if !frozen_stats {
                        let vs = &mut stats.views[v];
                        vs.count += 1;
                        vs.feature_sum += &view.raw.column(local);
                    }
                } else {
                    // The file may carry placeholder values for absent
                    // instances; they must not leak into the model.
                    view.raw.column_mut(local).fill(0.0);
                    let vs = &stats.views[v];
                    if vs.count == 0 {
                        view.filled.column_mut(local).fill(0.0);
                        view.weights[local] = COLD_START_WEIGHT;
                        cold_starts += 1;
                    } else {
                        let count = vs.count as f64;
                        let denom = if frozen_stats {
                            stats.instances_seen as f64
                        } else {
                            (global + 1) as f64
                        };
                        view.weights[local] = count / denom;
                        let mut dst = view.filled.column_mut(local);
                        for (d, x) in dst.iter_mut().enumerate() {
                            *x = vs.feature_sum[d] / count;
                        }
                    }
                }
            }
            if !frozen_stats {
                stats.instances_seen += 1;
            }
        }

        self.position += size;
        self.chunks_emitted += 1;
        Ok(Some(ChunkBatch {
            chunk_index: self.chunks_emitted,
            start: self.position - size,
            size,
            views,
            cold_starts,
        }))
    }
}

/// Draw a fresh incompleteness pattern for a complete dataset.
pub fn simulate_missing(source: &MultiViewSource, rate: f64, seed: u64) -> Result<IndicatorMatrix> {
    if !source.is_complete() {
        return Err(Error::InvalidValue(
            "missingness can only be simulated on a complete dataset".into(),
        ));
    }
    IndicatorMatrix::simulate_missing(source.n_instances(), source.n_views(), rate, seed)
}
