//! Synthetic labeled multi-view datasets with planted cluster structure.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::manifest::{Manifest, Storage, ViewSpec};
use crate::dataset::matrix_io::write_dense;
use crate::error::{Error, Result};

/// Shape and texture of a synthetic dataset.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub clusters: usize,
    /// Instances per cluster; N = clusters * per_cluster.
    pub per_cluster: usize,
    pub n_views: usize,
    /// Feature dimension of each view (length n_views).
    pub dims: Vec<usize>,
    /// Amplitude of elementwise non-negative uniform noise; 0 keeps every
    /// view exactly rank-`clusters`.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn n_instances(&self) -> usize {
        self.clusters * self.per_cluster
    }

    fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.per_cluster == 0 || self.n_views == 0 {
            return Err(Error::Config(
                "clusters, per-cluster count and view count must be positive".into(),
            ));
        }
        if self.dims.len() != self.n_views {
            return Err(Error::Config(format!(
                "{} dimensions given for {} views",
                self.dims.len(),
                self.n_views
            )));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("every view dimension must be positive".into()));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(Error::Config(format!(
                "noise must be finite and non-negative, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

/// The factors a dataset was built from, returned for ground-truth
/// comparisons in tests.
#[derive(Debug, Clone)]
pub struct PlantedFactors {
    /// N x clusters shared representation; row i is dominated by the
    /// column of instance i's cluster.
    pub shared: Array2<f64>,
    /// Per-view bases (dim x clusters).
    pub bases: Vec<Array2<f64>>,
    /// Cluster of each instance, interleaved so every chunk of a stream
    /// sees all clusters.
    pub labels: Vec<usize>,
}

/// Write `manifest.toml`, one dense view file per view, and `labels.txt`
/// into `out_dir`. Each view is `basis · sharedᵀ` plus optional
/// non-negative uniform noise; all randomness comes from the spec's seed,
/// so regeneration is byte-identical.
pub fn write_synthetic_dataset(spec: &SyntheticSpec, out_dir: &Path) -> Result<PlantedFactors> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let n = spec.n_instances();
    let k = spec.clusters;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let shared = Array2::from_shape_fn((n, k), |(i, j)| {
        if j == labels[i] {
            1.0 + 0.5 * rng.gen::<f64>()
        } else {
            0.05 * rng.gen::<f64>()
        }
    });

    let mut bases = Vec::with_capacity(spec.n_views);
    let mut views = Vec::with_capacity(spec.n_views);
    for (v, &dim) in spec.dims.iter().enumerate() {
        let basis = Array2::from_shape_fn((dim, k), |_| 0.2 + rng.gen::<f64>());
        let mut data = basis.dot(&shared.t());
        if spec.noise > 0.0 {
            data.mapv_inplace(|x| x + spec.noise * rng.gen::<f64>());
        }
        write_dense(&out_dir.join(format!("view{}.txt", v)), data.view())?;
        views.push(ViewSpec {
            id: v,
            dim,
            path: format!("view{}.txt", v),
            storage: Storage::DenseText,
            scale: 1.0,
        });
        bases.push(basis);
    }

    let labels_path = out_dir.join("labels.txt");
    let mut file = std::fs::File::create(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
    for &label in &labels {
        writeln!(file, "{}", label).map_err(|e| Error::io(&labels_path, e))?;
    }

    let manifest = Manifest {
        n_views: spec.n_views,
        n_instances: n,
        labels: Some("labels.txt".into()),
        indicator: None,
        views,
    };
    manifest.save(&out_dir.join("manifest.toml"))?;
    Ok(PlantedFactors { shared, bases, labels })
}
