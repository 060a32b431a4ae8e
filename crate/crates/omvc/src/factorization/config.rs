//! Solver hyperparameters and their validation.

use crate::error::{Error, Result};

/// Tuning knobs for the per-chunk alternating minimization.
///
/// `alpha` weights each view's pull toward the consensus representation and
/// must be strictly positive (the consensus closed form divides by it);
/// `beta` weights the sparsity penalty on the latent rows and may be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Latent dimension = number of clusters.
    pub k: usize,
    /// Per-view consensus-agreement weight, strictly positive.
    pub alpha: Vec<f64>,
    /// Per-view sparsity weight, non-negative.
    pub beta: Vec<f64>,
    /// Sufficient-decrease constant in (0, 1).
    pub sigma: f64,
    /// Backtracking factor in (0, 1); trial steps are 1, d, d^2, ...
    pub step_decay: f64,
    /// Cap on alternation sweeps per chunk.
    pub max_outer: usize,
    /// Cap on line-search trials per Newton step.
    pub max_inner: usize,
    /// Newton/projection iterations per block per sweep.
    pub newton_steps: usize,
    /// Relative objective-change threshold ending a chunk's alternation.
    pub tol_outer: f64,
    /// Relative projected-gradient threshold ending a block's iterations.
    pub tol_inner: f64,
    /// Relative ridge added to the basis Hessian before inversion, scaled
    /// by the mean diagonal of the accumulator.
    pub hessian_ridge: f64,
    /// Re-evaluate the sufficient-decrease inequality directly on the block
    /// objective for every accepted step, counting violations.
    pub verify_decrease: bool,
    /// When positive, end a chunk's alternation as soon as every block's
    /// projected-gradient residual (infinity norm of `min(x, ∇)`) falls to
    /// this value or below. Zero disables the check, leaving only the
    /// objective-change and sweep-count stops. Useful when a jointly
    /// stationary point matters more than wall time: the objective-change
    /// test can trigger long before the block residuals settle.
    pub stationarity_tol: f64,
}

impl SolverConfig {
    /// Defaults for a given latent dimension and view count. The agreement
    /// and sparsity weights default to 1e-2 and 1e-7 for every view.
    pub fn new(k: usize, n_views: usize) -> SolverConfig {
        SolverConfig {
            k,
            alpha: vec![1e-2; n_views],
            beta: vec![1e-7; n_views],
            sigma: 0.01,
            step_decay: 0.1,
            max_outer: 50,
            max_inner: 20,
            newton_steps: 5,
            tol_outer: 1e-4,
            tol_inner: 1e-6,
            hessian_ridge: 1e-8,
            verify_decrease: true,
            stationarity_tol: 0.0,
        }
    }

    pub fn n_views(&self) -> usize {
        self.alpha.len()
    }

    pub fn validate(&self, n_views: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("latent dimension k must be at least 1".into()));
        }
        if self.alpha.len() != n_views || self.beta.len() != n_views {
            return Err(Error::Config(format!(
                "alpha/beta must list one value per view: got {}/{} for {} views",
                self.alpha.len(),
                self.beta.len(),
                n_views
            )));
        }
        for (v, &a) in self.alpha.iter().enumerate() {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::Config(format!(
                    "alpha must be finite and > 0, view {} has {}",
                    v, a
                )));
            }
        }
        for (v, &b) in self.beta.iter().enumerate() {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::Config(format!(
                    "beta must be finite and >= 0, view {} has {}",
                    v, b
                )));
            }
        }
        for (name, x) in [("sigma", self.sigma), ("step_decay", self.step_decay)] {
            if !(x.is_finite() && 0.0 < x && x < 1.0) {
                return Err(Error::Config(format!("{} must lie strictly in (0, 1), got {}", name, x)));
            }
        }
        for (name, x) in [
            ("tol_outer", self.tol_outer),
            ("tol_inner", self.tol_inner),
            ("hessian_ridge", self.hessian_ridge),
            ("stationarity_tol", self.stationarity_tol),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::Config(format!("{} must be finite and >= 0, got {}", name, x)));
            }
        }
        if self.max_inner == 0 {
            return Err(Error::Config("max_inner must allow at least one trial".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = SolverConfig::new(3, 2);
        assert!(c.validate(2).is_ok());
        assert_eq!(c.alpha, vec![1e-2, 1e-2]);
        assert_eq!(c.beta, vec![1e-7, 1e-7]);
    }

    #[test]
    fn rejects_bad_parameters() {
        let base = SolverConfig::new(3, 2);

        let mut c = base.clone();
        c.k = 0;
        assert!(c.validate(2).is_err());

        let mut c = base.clone();
        c.alpha[1] = 0.0;
        assert!(c.validate(2).is_err());

        let mut c = base.clone();
        c.beta[0] = -1e-9;
        assert!(c.validate(2).is_err());

        let mut c = base.clone();
        c.sigma = 1.0;
        assert!(c.validate(2).is_err());

        let mut c = base.clone();
        c.step_decay = 0.0;
        assert!(c.validate(2).is_err());

        assert!(base.validate(3).is_err());
    }
}
