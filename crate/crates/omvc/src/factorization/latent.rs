//! Row-wise Newton projected-gradient update of a chunk's latent factors.
//!
//! For fixed bases the chunk objective separates across instances: each
//! latent row minimizes its own weighted fit error, consensus disagreement
//! and (linear, on the non-negative orthant) sparsity penalty. Every row
//! shares the same `k x k` Hessian factor `UᵀU + αI` — the per-row weight
//! enters only as a scalar that cancels into the Newton direction — so one
//! Cholesky factorization per view serves every row of the chunk.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::dataset::ChunkBatch;
use crate::error::{Error, Result};
use crate::factorization::basis::{StepFlags, ACCEPT_MARGIN_REL, NULL_STEP_REL};
use crate::factorization::config::SolverConfig;
use crate::factorization::objective::chunk_view_objective;
use crate::factorization::state::{ChunkFactors, FactorState};
use crate::linalg::{projected_grad_norm, Cholesky};

/// Gradient of the chunk objective with respect to one view's latent
/// matrix: per row `i`,
/// `2 w̃_i ((V UᵀU)_i − (XᵀU)_i) + 2 α w̃_i (V_i − V*_i) + β·1`.
pub fn latent_gradient(
    chunk: &ChunkBatch,
    factors: &ChunkFactors,
    state: &FactorState,
    view: usize,
    config: &SolverConfig,
) -> Array2<f64> {
    let u = &state.views[view].basis;
    let utu = u.t().dot(u);
    let xtu = chunk.views[view].filled.t().dot(u);
    latent_gradient_parts(
        &factors.latents[view],
        &utu,
        &xtu,
        &factors.consensus,
        &factors.wtilde[view],
        config.alpha[view],
        config.beta[view],
    )
}

pub(crate) fn latent_gradient_parts(
    latent: &Array2<f64>,
    utu: &Array2<f64>,
    xtu: &Array2<f64>,
    consensus: &Array2<f64>,
    wtilde: &Array1<f64>,
    alpha: f64,
    beta: f64,
) -> Array2<f64> {
    let mut grad = latent.dot(utu) - xtu + &((latent - consensus) * alpha);
    for (i, mut row) in grad.outer_iter_mut().enumerate() {
        row.mapv_inplace(|x| 2.0 * wtilde[i] * x + beta);
    }
    grad
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Objective contribution of a single row; used to double-check the
/// sufficient-decrease inequality on accepted steps. `u_flat` is the
/// row-major basis, so row `j` of the basis is `u_flat[j*k..(j+1)*k]`.
fn row_objective(
    x_col: ArrayView1<f64>,
    u_flat: &[f64],
    k: usize,
    row: &[f64],
    consensus_row: &[f64],
    wtilde: f64,
    alpha: f64,
    beta: f64,
) -> f64 {
    let mut fit = 0.0;
    for (j, &x) in x_col.iter().enumerate() {
        let r = x - dot(&u_flat[j * k..(j + 1) * k], row);
        fit += r * r;
    }
    let mut agree = 0.0;
    for (a, b) in row.iter().zip(consensus_row) {
        let d = a - b;
        agree += d * d;
    }
    let l1: f64 = row.iter().sum();
    wtilde * fit + alpha * wtilde * agree + beta * l1
}

/// Backtrack one latent row along a descent direction, accepting the
/// first projected trial that passes the exact-quadratic
/// sufficient-decrease test. On success the accepted row is left in
/// `trial` and the predicted objective change and gradient inner product
/// are returned; `None` means every trial failed. The three scratch
/// slices avoid per-trial allocations — this is the innermost loop of the
/// whole solver.
#[allow(clippy::too_many_arguments)]
fn backtrack_row(
    old_row: &[f64],
    g_row: &[f64],
    d_row: &[f64],
    hess_flat: &[f64],
    k: usize,
    wtilde: f64,
    row_scale: f64,
    config: &SolverConfig,
    trial: &mut [f64],
    delta: &mut [f64],
    hdelta: &mut [f64],
) -> Option<(f64, f64)> {
    let mut gamma = 1.0;
    for _ in 0..config.max_inner {
        for j in 0..k {
            trial[j] = (old_row[j] - d_row[j] * gamma).max(0.0);
            delta[j] = trial[j] - old_row[j];
        }
        let grad_dot = dot(g_row, delta);
        // Exact quadratic change: w̃ δᵀ(UᵀU + αI)δ, the sparsity term
        // being linear contributes only through the gradient.
        for j in 0..k {
            hdelta[j] = dot(&hess_flat[j * k..(j + 1) * k], delta);
        }
        let curv = wtilde * dot(delta, hdelta);
        let predicted = grad_dot + curv;
        let test = (1.0 - config.sigma) * grad_dot + curv;
        if test <= -ACCEPT_MARGIN_REL * row_scale && -predicted >= NULL_STEP_REL * row_scale {
            return Some((predicted, grad_dot));
        }
        gamma *= config.step_decay;
    }
    None
}

/// Update one view's latent rows in place. Each row runs its own
/// backtracking line search along the shared Newton direction; rows whose
/// search fails stay unchanged and are counted, not fatal.
pub fn update_latent(
    chunk: &ChunkBatch,
    factors: &mut ChunkFactors,
    state: &FactorState,
    view: usize,
    config: &SolverConfig,
) -> Result<StepFlags> {
    let mut flags = StepFlags::default();
    let u = &state.views[view].basis;
    let k = config.k;
    let size = chunk.size;
    let alpha = config.alpha[view];
    let beta = config.beta[view];
    let filled = &chunk.views[view].filled;

    let utu = u.t().dot(u);
    let mut hess = utu.clone();
    for i in 0..k {
        hess[[i, i]] += alpha;
    }
    // Positive definite outright: alpha > 0 needs no ridge.
    let chol = Cholesky::factor(hess.view())?;
    let xtu = filled.t().dot(u);

    let ChunkFactors {
        latents,
        consensus,
        wtilde,
    } = factors;
    let latent = &mut latents[view];
    let wt = &wtilde[view];

    let mut objective = chunk_view_objective(filled, u, latent, consensus, wt, alpha, beta);
    if !objective.is_finite() {
        return Err(Error::Numeric {
            chunk: chunk.chunk_index,
            msg: "latent objective is not finite".into(),
        });
    }

    for _ in 0..config.newton_steps {
        let grad = latent_gradient_parts(latent, &utu, &xtu, consensus, wt, alpha, beta);
        let scale = 1.0 + objective.abs();
        if projected_grad_norm(latent.view(), grad.view()) <= config.tol_inner * scale {
            break;
        }
        // Shared-Hessian Newton direction: rows of ∇ divided by 2w̃_i, then
        // right-multiplied by (UᵀU + αI)⁻¹.
        let mut scaled = grad.clone();
        for (i, mut row) in scaled.outer_iter_mut().enumerate() {
            row /= 2.0 * wt[i];
        }
        let direction = chol.solve_rows(scaled.view());

        let row_scale = scale / size as f64;
        let trace_hess: f64 = hess.diag().sum();
        let hess_flat = hess.as_slice().expect("hessian is row-major contiguous");
        let u_flat = u.as_slice().expect("basis is row-major contiguous");
        let mut trial = vec![0.0; k];
        let mut delta = vec![0.0; k];
        let mut hdelta = vec![0.0; k];
        let mut fallback = vec![0.0; k];
        let mut any_accepted = false;
        for i in 0..size {
            let g_view = grad.row(i);
            let g_row = g_view.as_slice().expect("gradient rows are contiguous");
            let d_view = direction.row(i);
            let d_row = d_view.as_slice().expect("direction rows are contiguous");
            let old_view = latent.row(i);
            let old_row = old_view.as_slice().expect("latent rows are contiguous");
            let c_view = consensus.row(i);
            let cons_row = c_view.as_slice().expect("consensus rows are contiguous");
            let mut step = backtrack_row(
                old_row, g_row, d_row, hess_flat, k, wt[i], row_scale, config, &mut trial,
                &mut delta, &mut hdelta,
            );
            if step.is_none() {
                // A partially-pinned row can make the projected Newton
                // direction uphill on its free coordinates; the
                // projected-gradient direction always admits a step away
                // from stationarity.
                let inv_l = 1.0 / (2.0 * wt[i] * trace_hess).max(f64::MIN_POSITIVE);
                for j in 0..k {
                    fallback[j] = g_row[j] * inv_l;
                }
                step = backtrack_row(
                    old_row, g_row, &fallback, hess_flat, k, wt[i], row_scale, config, &mut trial,
                    &mut delta, &mut hdelta,
                );
            }
            match step {
                Some((predicted, grad_dot)) => {
                    if config.verify_decrease {
                        let before = row_objective(
                            filled.column(i),
                            u_flat,
                            k,
                            old_row,
                            cons_row,
                            wt[i],
                            alpha,
                            beta,
                        );
                        let after = row_objective(
                            filled.column(i),
                            u_flat,
                            k,
                            &trial,
                            cons_row,
                            wt[i],
                            alpha,
                            beta,
                        );
                        if after - before > config.sigma * grad_dot {
                            flags.decrease_violations += 1;
                        }
                    }
                    latent
                        .row_mut(i)
                        .as_slice_mut()
                        .expect("latent rows are contiguous")
                        .copy_from_slice(&trial);
                    objective += predicted;
                    flags.accepted += 1;
                    any_accepted = true;
                }
                None => {
                    if projected_grad_norm(
                        ArrayView1::from(old_row).insert_axis(Axis(0)),
                        g_view.insert_axis(Axis(0)),
                    ) > config.tol_inner * row_scale
                    {
                        flags.ls_exhaustions += 1;
                    }
                }
            }
        }
        if !any_accepted {
            break;
        }
        if !objective.is_finite() {
            return Err(Error::Numeric {
                chunk: chunk.chunk_index,
                msg: "latent objective became non-finite".into(),
            });
        }
    }
    Ok(flags)
}
