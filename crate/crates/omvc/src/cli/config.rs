//! Declarative experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::SolverConfig;

/// A regularization weight given either once for all views or per view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerView {
    Shared(f64),
    Each(Vec<f64>),
}

impl PerView {
    fn resolve(&self, n_views: usize, name: &str) -> Result<Vec<f64>> {
        match self {
            PerView::Shared(x) => Ok(vec![*x; n_views]),
            PerView::Each(xs) => {
                if xs.len() != n_views {
                    return Err(Error::Config(format!(
                        "{} lists {} values for {} views",
                        name,
                        xs.len(),
                        n_views
                    )));
                }
                Ok(xs.clone())
            }
        }
    }
}

/// The `[solver]` section: mirrors `SolverConfig`, with weights that may
/// be shared across views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Latent dimensionality (number of factors).
    pub k: usize,
    #[serde(default = "default_alpha")]
    pub alpha: PerView,
    #[serde(default = "default_beta")]
    pub beta: PerView,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_step_decay")]
    pub step_decay: f64,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default = "default_max_inner")]
    pub max_inner: usize,
    #[serde(default = "default_newton_steps")]
    pub newton_steps: usize,
    #[serde(default = "default_tol_outer")]
    pub tol_outer: f64,
    #[serde(default = "default_tol_inner")]
    pub tol_inner: f64,
    #[serde(default = "default_hessian_ridge")]
    pub hessian_ridge: f64,
    #[serde(default = "default_true")]
    pub verify_decrease: bool,
}

fn default_alpha() -> PerView {
    PerView::Shared(1e-2)
}
fn default_beta() -> PerView {
    PerView::Shared(1e-7)
}
fn default_sigma() -> f64 {
    0.01
}
fn default_step_decay() -> f64 {
    0.1
}
fn default_max_outer() -> usize {
    50
}
fn default_max_inner() -> usize {
    20
}
fn default_newton_steps() -> usize {
    5
}
fn default_tol_outer() -> f64 {
    1e-4
}
fn default_tol_inner() -> f64 {
    1e-6
}
fn default_hessian_ridge() -> f64 {
    1e-8
}
fn default_true() -> bool {
    true
}
fn default_passes() -> usize {
    1
}
fn default_restarts() -> usize {
    20
}

/// Everything one experiment needs: the dataset, solver knobs, streaming
/// shape, seeding and where to write outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset manifest, resolved relative to the config file's directory
    /// when relative.
    pub manifest: PathBuf,
    /// Where run outputs land (overridable by `OMVC_OUT_DIR` or a flag).
    pub output_dir: PathBuf,
    /// Instances per chunk.
    pub chunk_size: usize,
    #[serde(default = "default_passes")]
    pub passes: usize,
    #[serde(default)]
    pub seed: u64,
    /// K-means repetitions when scoring.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Fraction of instances to delete per view at run time (requires a
    /// complete dataset; 0 leaves the dataset as stored).
    #[serde(default)]
    pub missing_rate: f64,
    pub solver: SolverSection,
}

impl ExperimentConfig {
    pub fn parse_str(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config: {}", e)))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.chunk_size == 0 {
            return Err(Error::Config("chunk_size must be at least 1".into()));
        }
        if self.passes == 0 {
            return Err(Error::Config("passes must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::Config(format!(
                "missing_rate must be in [0, 1), got {}",
                self.missing_rate
            )));
        }
        if self.solver.k == 0 {
            return Err(Error::Config("solver.k must be at least 1".into()));
        }
        Ok(())
    }

    /// Concrete per-view solver configuration for a dataset with
    /// `n_views` views; validates every numeric range.
    pub fn solver_config(&self, n_views: usize) -> Result<SolverConfig> {
        let section = &self.solver;
        let mut solver = SolverConfig::new(section.k, n_views);
        solver.alpha = section.alpha.resolve(n_views, "solver.alpha")?;
        solver.beta = section.beta.resolve(n_views, "solver.beta")?;
        solver.sigma = section.sigma;
        solver.step_decay = section.step_decay;
        solver.max_outer = section.max_outer;
        solver.max_inner = section.max_inner;
        solver.newton_steps = section.newton_steps;
        solver.tol_outer = section.tol_outer;
        solver.tol_inner = section.tol_inner;
        solver.hessian_ridge = section.hessian_ridge;
        solver.verify_decrease = section.verify_decrease;
        solver.validate(n_views)?;
        Ok(solver)
    }
}
