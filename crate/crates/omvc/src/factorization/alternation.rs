//! Per-chunk alternating minimization.
//!
//! One sweep updates every view's basis against the full history plus the
//! current chunk, then every view's latent rows, then the shared consensus.
//! Each phase can only lower the same canonical objective, so the recorded
//! per-sweep sequence is non-increasing; if floating-point noise ever makes
//! a sweep end higher, that sweep is rolled back and the alternation stops.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::ChunkBatch;
use crate::error::{Error, Result};
use crate::factorization::basis::{newton_pgd_basis, StepFlags};
use crate::factorization::config::SolverConfig;
use crate::factorization::consensus::{consensus_of, consensus_residual, solve_consensus};
use crate::factorization::latent::{latent_gradient, update_latent};
use crate::factorization::objective::{chunk_objective, weighted_energy};
use crate::factorization::state::{ChunkFactors, FactorState};
use crate::linalg::{kkt_residual_inf, project_nonneg, Cholesky};

/// What happened while fitting one chunk.
#[derive(Debug, Clone, Default)]
pub struct AlternationReport {
    /// Completed (not rolled back) sweeps.
    pub sweeps: usize,
    /// Canonical objective after initialization and after each kept sweep.
    pub objective_trace: Vec<f64>,
    /// Merged line-search counters from every block update.
    pub flags: StepFlags,
    /// 1 if the final sweep was undone because round-off raised the
    /// objective.
    pub rollbacks: usize,
}

/// Draw initial factors for the very first chunk: entries i.i.d. uniform
/// in (0, 1) scaled per view by `sqrt(mean(filled) / k)`, bases first,
/// views in order. Exposed so an external reference implementation can
/// reproduce the exact initialization from the same seeded generator.
pub fn draw_initial_factors(
    rng: &mut ChaCha8Rng,
    chunk: &ChunkBatch,
    k: usize,
) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
    let mut bases = Vec::with_capacity(chunk.views.len());
    let mut latents = Vec::with_capacity(chunk.views.len());
    for cv in &chunk.views {
        let mean = cv.filled.mean().unwrap_or(0.0);
        let scale = (mean / k as f64).sqrt();
        let dim = cv.filled.nrows();
        let basis = Array2::from_shape_fn((dim, k), |_| rng.gen_range(0.0..1.0) * scale);
        let latent = Array2::from_shape_fn((chunk.size, k), |_| rng.gen_range(0.0..1.0) * scale);
        bases.push(basis);
        latents.push(latent);
    }
    (bases, latents)
}

/// Warm-start latents for a later chunk: the non-negative projection of
/// the ridge least-squares seed `XᵀU (UᵀU + αI)⁻¹` per view.
fn warm_start_latents(
    chunk: &ChunkBatch,
    state: &FactorState,
    config: &SolverConfig,
) -> Result<Vec<Array2<f64>>> {
    let mut latents = Vec::with_capacity(chunk.views.len());
    for (v, cv) in chunk.views.iter().enumerate() {
        let u = &state.views[v].basis;
        let mut gram = u.t().dot(u);
        for i in 0..config.k {
            gram[[i, i]] += config.alpha[v];
        }
        let chol = Cholesky::factor(gram.view()).map_err(|e| e.with_chunk(chunk.chunk_index))?;
        let mut latent = chol.solve_rows(cv.filled.t().dot(u).view());
        project_nonneg(&mut latent);
        latents.push(latent);
    }
    Ok(latents)
}

/// True when every block of the chunk problem satisfies its first-order
/// conditions to within `config.stationarity_tol` at the current point:
/// the consensus residual and, per view, the latent and basis
/// projected-gradient residuals in the infinity norm. The basis gradient
/// is evaluated against accumulators rebuilt from the *current* latents,
/// so this certifies joint stationarity, not the staggered per-block view
/// each update saw during the sweep.
fn blocks_stationary(
    chunk: &ChunkBatch,
    state: &FactorState,
    factors: &ChunkFactors,
    config: &SolverConfig,
) -> bool {
    let tol = config.stationarity_tol;
    if consensus_residual(factors, config) > tol {
        return false;
    }
    for v in 0..state.n_views() {
        let grad = latent_gradient(chunk, factors, state, v, config);
        if kkt_residual_inf(factors.latents[v].view(), grad.view()) > tol {
            return false;
        }
        let latent = &factors.latents[v];
        let weighted = latent * &factors.wtilde[v].view().insert_axis(Axis(1));
        let a_eff = &state.views[v].accum_a + &latent.t().dot(&weighted);
        let b_eff = &state.views[v].accum_b + &chunk.views[v].filled.dot(&weighted);
        let basis_grad = (state.views[v].basis.dot(&a_eff) - &b_eff) * 2.0;
        if kkt_residual_inf(state.views[v].basis.view(), basis_grad.view()) > tol {
            return false;
        }
    }
    true
}

fn check_shapes(chunk: &ChunkBatch, state: &FactorState, config: &SolverConfig) -> Result<()> {
    config.validate(state.n_views())?;
    if chunk.views.len() != state.n_views() {
        return Err(Error::Dimension(format!(
            "chunk has {} views, state has {}",
            chunk.views.len(),
            state.n_views()
        )));
    }
    if config.k != state.k {
        return Err(Error::Dimension(format!(
            "config k = {} but state was built with k = {}",
            config.k, state.k
        )));
    }
    for (v, cv) in chunk.views.iter().enumerate() {
        if cv.filled.nrows() != state.views[v].dim() {
            return Err(Error::Dimension(format!(
                "view {}: chunk dim {} vs state dim {}",
                v,
                cv.filled.nrows(),
                state.views[v].dim()
            )));
        }
        if cv.filled.ncols() != chunk.size || cv.weights.len() != chunk.size {
            return Err(Error::Dimension(format!(
                "view {}: inconsistent chunk width",
                v
            )));
        }
    }
    Ok(())
}

/// Fit one chunk: initialize (or warm-start) the latents, then alternate
/// basis, latent and consensus updates until the objective's relative
/// change drops below `tol_outer` or `max_outer` sweeps elapse. The
/// persistent accumulators are read, not written — fold the chunk in with
/// [`FactorState::accumulate`] afterwards.
pub fn chunk_alternation(
    chunk: &ChunkBatch,
    state: &mut FactorState,
    config: &SolverConfig,
) -> Result<(ChunkFactors, AlternationReport)> {
    check_shapes(chunk, state, config)?;
    let n_views = state.n_views();
    let wtilde = ChunkFactors::wtilde_of(chunk);

    let latents = if !state.initialized {
        let (bases, latents) = draw_initial_factors(&mut state.rng, chunk, config.k);
        for (vf, basis) in state.views.iter_mut().zip(bases) {
            vf.basis = basis;
        }
        state.initialized = true;
        latents
    } else {
        warm_start_latents(chunk, state, config)?
    };

    let mut factors = ChunkFactors {
        consensus: consensus_of(&latents, &wtilde, &config.alpha),
        latents,
        wtilde,
    };

    let mut report = AlternationReport::default();
    let mut objective = chunk_objective(state, chunk, &factors, config);
    if !objective.is_finite() {
        return Err(Error::Numeric {
            chunk: chunk.chunk_index,
            msg: "objective not finite at initialization".into(),
        });
    }
    report.objective_trace.push(objective);

    // Per-view constants of the current chunk's fit term.
    let chunk_energy: Vec<f64> = (0..n_views)
        .map(|v| weighted_energy(chunk.views[v].filled.view(), factors.wtilde[v].view()))
        .collect();

    for _ in 0..config.max_outer {
        let basis_snapshot: Vec<Array2<f64>> =
            state.views.iter().map(|vf| vf.basis.clone()).collect();
        let factors_snapshot = factors.clone();

        for v in 0..n_views {
            // Effective accumulators: history plus this chunk under its
            // current latent.
            let latent = &factors.latents[v];
            let weighted_latent = latent * &factors.wtilde[v].view().insert_axis(Axis(1));
            let a_eff = &state.views[v].accum_a + &latent.t().dot(&weighted_latent);
            let b_eff = &state.views[v].accum_b + &chunk.views[v].filled.dot(&weighted_latent);
            let c_eff = state.views[v].hist_const + chunk_energy[v];
            let flags = newton_pgd_basis(
                &mut state.views[v].basis,
                &a_eff,
                &b_eff,
                c_eff,
                config,
            )
            .map_err(|e| e.with_chunk(chunk.chunk_index))?;
            report.flags.merge(flags);
        }
        for v in 0..n_views {
            let flags = update_latent(chunk, &mut factors, state, v, config)?;
            report.flags.merge(flags);
        }
        solve_consensus(&mut factors, config);

        let after = chunk_objective(state, chunk, &factors, config);
        if !after.is_finite() {
            return Err(Error::Numeric {
                chunk: chunk.chunk_index,
                msg: "objective became non-finite during alternation".into(),
            });
        }
        if after > objective {
            // Round-off noise: undo the sweep and stop.
            for (vf, basis) in state.views.iter_mut().zip(basis_snapshot) {
                vf.basis = basis;
            }
            factors = factors_snapshot;
            report.rollbacks += 1;
            break;
        }
        let drop = objective - after;
        objective = after;
        report.objective_trace.push(objective);
        report.sweeps += 1;
        if config.stationarity_tol > 0.0 && blocks_stationary(chunk, state, &factors, config) {
            break;
        }
        if drop <= config.tol_outer * (1.0 + objective.abs()) {
            break;
        }
    }

    Ok((factors, report))
}
