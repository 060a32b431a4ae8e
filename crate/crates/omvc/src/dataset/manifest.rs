//! On-disk dataset manifest.
//!
//! A dataset is a TOML manifest listing the per-view matrix files plus
//! optional label and indicator files. Paths are interpreted relative to
//! the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Storage format of one view matrix file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Storage {
    /// One instance per line, `dim` whitespace-separated reals per line.
    #[serde(rename = "dense-text")]
    DenseText,
    /// Lines `i j value` with 0-based indices in ascending `(i, j)` order;
    /// unlisted entries are zero.
    #[serde(rename = "sparse-coordinate")]
    SparseCoordinate,
}

fn default_scale() -> f64 {
    1.0
}

/// One view's entry in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewSpec {
    pub id: usize,
    /// Feature count of this view.
    pub dim: usize,
    pub path: String,
    pub storage: Storage,
    /// Constant multiplier applied to every entry on read.
    #[serde(default = "default_scale")]
    pub scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub n_views: usize,
    pub n_instances: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indicator: Option<String>,
    pub views: Vec<ViewSpec>,
}

impl Manifest {
    /// Parse a manifest from TOML text and validate its internal consistency.
    pub fn parse_str(text: &str) -> Result<Manifest> {
        let manifest: Manifest =
            toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).map_err(|e| Error::Manifest(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn validate(&self) -> Result<()> {
        if self.n_instances == 0 {
            return Err(Error::Manifest("n_instances must be positive".into()));
        }
        if self.n_views == 0 || self.n_views != self.views.len() {
            return Err(Error::Manifest(format!(
                "n_views = {} but {} view entries listed",
                self.n_views,
                self.views.len()
            )));
        }
        for (idx, view) in self.views.iter().enumerate() {
            if view.id != idx {
                return Err(Error::Manifest(format!(
                    "view ids must be 0..n_views in order, entry {} has id {}",
                    idx, view.id
                )));
            }
            if view.dim == 0 {
                return Err(Error::Manifest(format!("view {} has dim 0", idx)));
            }
            if !(view.scale.is_finite() && view.scale > 0.0) {
                return Err(Error::Manifest(format!(
                    "view {} scale must be finite and positive, got {}",
                    idx, view.scale
                )));
            }
        }
        Ok(())
    }

    /// Resolve a manifest-relative path against the manifest's directory.
    pub fn resolve(base: &Path, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }
}

/// Read a labels file: one integer per line, `n` lines. Raw label ids are
/// mapped to dense 0-based ids in order of first appearance, which is
/// harmless because every downstream metric is relabel-invariant.
pub fn load_labels(path: &Path, n: usize) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, n).map_err(|(line, msg)| Error::parse(path, line, msg))
}

pub fn parse_labels(text: &str, n: usize) -> std::result::Result<Vec<usize>, (usize, String)> {
    let mut dense: Vec<usize> = Vec::with_capacity(n);
    let mut seen: Vec<i64> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let raw: i64 = trimmed
            .parse()
            .map_err(|_| (lineno + 1, format!("expected an integer label, got {:?}", trimmed)))?;
        let id = match seen.iter().position(|&s| s == raw) {
            Some(pos) => pos,
            None => {
                seen.push(raw);
                seen.len() - 1
            }
        };
        dense.push(id);
    }
    if dense.len() != n {
        return Err((
            dense.len() + 1,
            format!("expected {} labels, found {}", n, dense.len()),
        ));
    }
    Ok(dense)
}
