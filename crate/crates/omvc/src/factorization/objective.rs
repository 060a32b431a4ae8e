//! Canonical objective evaluators.
//!
//! Every monotonicity check and stopping rule in the solver measures the
//! same quantity through these functions, so "the objective went down" is
//! always a statement about one consistent number.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::dataset::ChunkBatch;
use crate::factorization::config::SolverConfig;
use crate::factorization::state::{ChunkFactors, FactorState, ViewFactor};
use crate::linalg::frob_dot;

/// Sum of squared column norms weighted by the squared instance weights:
/// the data-only constant of a chunk's fit term.
pub fn weighted_energy(x: ArrayView2<f64>, wtilde: ArrayView1<f64>) -> f64 {
    x.axis_iter(Axis(1))
        .zip(wtilde.iter())
        .map(|(col, &w)| w * col.iter().map(|v| v * v).sum::<f64>())
        .sum()
}

/// Full-history basis objective for one view, reconstructed from the
/// accumulators: `tr(U A Uᵀ) − 2⟨U, B⟩ + hist_const`.
pub fn history_term_parts(u: &Array2<f64>, a: &Array2<f64>, b: &Array2<f64>, c: f64) -> f64 {
    frob_dot(u.dot(a).view(), u.view()) - 2.0 * frob_dot(u.view(), b.view()) + c
}

pub fn history_term(vf: &ViewFactor) -> f64 {
    history_term_parts(&vf.basis, &vf.accum_a, &vf.accum_b, vf.hist_const)
}

/// Weighted squared reconstruction error of one chunk for one view:
/// the columns of `X − U Vᵀ` scaled by the instance weights.
pub fn fit_term(
    filled: &Array2<f64>,
    u: &Array2<f64>,
    latent: &Array2<f64>,
    wtilde: &Array1<f64>,
) -> f64 {
    let recon = u.dot(&latent.t());
    let mut total = 0.0;
    for (i, (col, rcol)) in filled
        .axis_iter(Axis(1))
        .zip(recon.axis_iter(Axis(1)))
        .enumerate()
    {
        let mut sq = 0.0;
        for (x, r) in col.iter().zip(rcol.iter()) {
            let d = x - r;
            sq += d * d;
        }
        total += wtilde[i] * sq;
    }
    total
}

/// Weighted squared disagreement between a view's latent rows and the
/// consensus rows.
pub fn consensus_term(latent: &Array2<f64>, consensus: &Array2<f64>, wtilde: &Array1<f64>) -> f64 {
    let mut total = 0.0;
    for (i, (row, crow)) in latent
        .outer_iter()
        .zip(consensus.outer_iter())
        .enumerate()
    {
        let mut sq = 0.0;
        for (a, b) in row.iter().zip(crow.iter()) {
            let d = a - b;
            sq += d * d;
        }
        total += wtilde[i] * sq;
    }
    total
}

/// Entry sum of a non-negative matrix (its elementwise L1 norm).
pub fn l1_term(latent: &Array2<f64>) -> f64 {
    latent.iter().sum()
}

/// One view's share of the chunk objective, excluding the history term.
pub fn chunk_view_objective(
    filled: &Array2<f64>,
    u: &Array2<f64>,
    latent: &Array2<f64>,
    consensus: &Array2<f64>,
    wtilde: &Array1<f64>,
    alpha: f64,
    beta: f64,
) -> f64 {
    fit_term(filled, u, latent, wtilde)
        + alpha * consensus_term(latent, consensus, wtilde)
        + beta * l1_term(latent)
}

/// The complete objective the alternation drives down for one chunk:
/// every view's history term plus its current-chunk fit, consensus
/// disagreement and sparsity terms.
pub fn chunk_objective(
    state: &FactorState,
    chunk: &ChunkBatch,
    factors: &ChunkFactors,
    config: &SolverConfig,
) -> f64 {
    let mut total = 0.0;
    for (v, vf) in state.views.iter().enumerate() {
        total += history_term(vf);
        total += chunk_view_objective(
            &chunk.views[v].filled,
            &vf.basis,
            &factors.latents[v],
            &factors.consensus,
            &factors.wtilde[v],
            config.alpha[v],
            config.beta[v],
        );
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn history_parts_match_explicit_sum() {
        // One chunk of two instances: the accumulator identity must equal
        // the directly evaluated weighted fit error for an arbitrary U.
        let x = array![[1.0, 3.0], [2.0, 0.5]];
        let v = array![[0.7, 0.1], [0.2, 0.9]];
        let wt = array![1.0, 0.25];

        let weighted_v = &v * &wt.view().insert_axis(Axis(1));
        let a = v.t().dot(&weighted_v);
        let b = x.dot(&weighted_v);
        let c = weighted_energy(x.view(), wt.view());

        let u = array![[0.3, 0.8], [0.5, 0.2]];
        let direct = fit_term(&x, &u, &v, &wt);
        let via_parts = history_term_parts(&u, &a, &b, c);
        assert!((direct - via_parts).abs() < 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn terms_vanish_on_perfect_agreement() {
        let u = array![[1.0, 0.0], [0.0, 1.0]];
        let v = array![[2.0, 1.0], [0.5, 3.0]];
        let x = u.dot(&v.t());
        let wt = array![1.0, 1.0];
        assert_eq!(fit_term(&x, &u, &v, &wt), 0.0);
        assert_eq!(consensus_term(&v, &v, &wt), 0.0);
        assert_eq!(l1_term(&v), 6.5);
    }
}
