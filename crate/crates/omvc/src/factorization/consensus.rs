//! Closed-form consensus across views.
//!
//! Minimizing the weighted disagreement `Σ_v α_v ‖W^(v)(V^(v) − V*)‖²`
//! over `V*` decouples per row: each consensus row is the convex
//! combination of the views' latent rows with coefficients
//! `α_v w̃_i^(v) / Σ_u α_u w̃_i^(u)`. Non-negativity is inherited from the
//! inputs, so no projection is needed.

use ndarray::Array2;

use crate::factorization::config::SolverConfig;
use crate::factorization::state::ChunkFactors;
use crate::linalg::frob_norm_sq;

/// Replace `factors.consensus` with the exact minimizer of the weighted
/// disagreement given the current latents.
pub fn solve_consensus(factors: &mut ChunkFactors, config: &SolverConfig) {
    factors.consensus = consensus_of(&factors.latents, &factors.wtilde, &config.alpha);
}

pub(crate) fn consensus_of(
    latents: &[Array2<f64>],
    wtilde: &[ndarray::Array1<f64>],
    alpha: &[f64],
) -> Array2<f64> {
    let size = latents[0].nrows();
    let k = latents[0].ncols();
    let mut consensus = Array2::zeros((size, k));
    for i in 0..size {
        let total: f64 = (0..latents.len()).map(|v| alpha[v] * wtilde[v][i]).sum();
        let mut out = consensus.row_mut(i);
        for (v, latent) in latents.iter().enumerate() {
            let coeff = alpha[v] * wtilde[v][i] / total;
            out.scaled_add(coeff, &latent.row(i));
        }
    }
    consensus
}

/// Frobenius norm of the consensus first-order condition
/// `Σ_v α_v W̃^(v) (V* − V^(v))`; zero at the exact minimizer.
pub fn consensus_residual(factors: &ChunkFactors, config: &SolverConfig) -> f64 {
    let size = factors.consensus.nrows();
    let k = factors.consensus.ncols();
    let mut residual = Array2::zeros((size, k));
    for (v, latent) in factors.latents.iter().enumerate() {
        let diff = &factors.consensus - latent;
        for i in 0..size {
            residual
                .row_mut(i)
                .scaled_add(config.alpha[v] * factors.wtilde[v][i], &diff.row(i));
        }
    }
    frob_norm_sq(residual.view()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    fn factors(latents: Vec<Array2<f64>>, weights: Vec<Array1<f64>>) -> ChunkFactors {
        let size = latents[0].nrows();
        let k = latents[0].ncols();
        ChunkFactors {
            wtilde: weights.iter().map(|w| w.mapv(|x| x * x)).collect(),
            latents,
            consensus: Array2::zeros((size, k)),
        }
    }

    #[test]
    fn single_view_consensus_is_that_view() {
        let v = array![[1.0, 2.0], [0.5, 0.25]];
        let mut f = factors(vec![v.clone()], vec![array![1.0, 0.3]]);
        let config = SolverConfig::new(2, 1);
        solve_consensus(&mut f, &config);
        assert!(f
            .consensus
            .iter()
            .zip(v.iter())
            .all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(consensus_residual(&f, &config) < 1e-12);
    }

    #[test]
    fn equal_weights_average_symmetric_rows() {
        let mut f = factors(
            vec![array![[1.0, 0.0]], array![[0.0, 1.0]]],
            vec![array![1.0], array![1.0]],
        );
        let config = SolverConfig::new(2, 2);
        solve_consensus(&mut f, &config);
        assert_eq!(f.consensus, array![[0.5, 0.5]]);
    }

    #[test]
    fn unequal_weights_tilt_the_combination() {
        // Weights 1 and 0.5 square to coefficients 1 and 0.25: the row
        // (2,0) vs (0,2) combines to (1.6, 0.4).
        let mut f = factors(
            vec![array![[2.0, 0.0]], array![[0.0, 2.0]]],
            vec![array![1.0], array![0.5]],
        );
        let mut config = SolverConfig::new(2, 2);
        config.alpha = vec![1.0, 1.0];
        solve_consensus(&mut f, &config);
        assert!((f.consensus[[0, 0]] - 1.6).abs() < 1e-15);
        assert!((f.consensus[[0, 1]] - 0.4).abs() < 1e-15);
        assert!(consensus_residual(&f, &config) < 1e-12);
    }
}
