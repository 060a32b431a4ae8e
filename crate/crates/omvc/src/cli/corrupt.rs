//! Derive an incomplete-view copy of a complete dataset.

use std::path::Path;

use crate::dataset::manifest::{Manifest, ViewSpec};
use crate::dataset::{IndicatorMatrix, MultiViewSource};
use crate::error::{Error, Result};

/// Copy the dataset behind `manifest_path` into `out_dir` with a freshly
/// simulated presence pattern: each view independently loses
/// `⌊rate·N⌋` instances, with every instance keeping at least one view.
/// View files are copied unchanged; only the indicator marks absences.
pub fn corrupt_dataset(manifest_path: &Path, rate: f64, seed: u64, out_dir: &Path) -> Result<()> {
    // Full validation pass before anything is written.
    let source = MultiViewSource::open(manifest_path)?;
    if !source.is_complete() {
        return Err(Error::Config(
            "source dataset already has missing instances; corrupt expects a complete dataset"
                .into(),
        ));
    }
    let manifest = Manifest::load(manifest_path)?;
    let base = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ".".into());

    let n = manifest.n_instances;
    let indicator = IndicatorMatrix::simulate_missing(n, manifest.n_views, rate, seed)?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut views = Vec::with_capacity(manifest.views.len());
    for view in &manifest.views {
        let src = Manifest::resolve(&base, &view.path);
        let name = format!("view{}.txt", view.id);
        let dst = out_dir.join(&name);
        std::fs::copy(&src, &dst).map_err(|e| Error::io(&dst, e))?;
        views.push(ViewSpec { path: name, ..view.clone() });
    }
    let labels = match &manifest.labels {
        Some(rel) => {
            let dst = out_dir.join("labels.txt");
            std::fs::copy(Manifest::resolve(&base, rel), &dst).map_err(|e| Error::io(&dst, e))?;
            Some("labels.txt".to_string())
        }
        None => None,
    };
    indicator.save(&out_dir.join("indicator.txt"))?;

    let corrupted = Manifest {
        n_views: manifest.n_views,
        n_instances: n,
        labels,
        indicator: Some("indicator.txt".into()),
        views,
    };
    corrupted.save(&out_dir.join("manifest.toml"))
}
