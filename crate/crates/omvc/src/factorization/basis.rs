//! Hessian-preconditioned projected-gradient update of a view's basis.
//!
//! The basis subproblem is exactly quadratic: its value at any `U` is
//! `tr(U A Uᵀ) − 2⟨U, B⟩ + const` with constant Hessian `2A`. The Newton
//! direction is the gradient right-multiplied by the (ridged) inverse of
//! `2A`, and a trial step is accepted through a quadratic-form test that is
//! algebraically identical to the sufficient-decrease inequality
//! `J(U⁺) − J(U) ≤ σ⟨∇J, U⁺ − U⟩` — identical because the objective is
//! quadratic, so the predicted change `⟨∇J, Δ⟩ + ⟨Δ, ΔA⟩` is the exact
//! change.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::factorization::config::SolverConfig;
use crate::factorization::objective::history_term_parts;
use crate::factorization::state::FactorState;
use crate::linalg::{frob_dot, project_nonneg, projected_grad_norm, Cholesky};

/// Steps below this fraction of the objective scale are considered noise
/// and not taken, which keeps the recorded objective sequence monotone in
/// floating point.
pub(crate) const NULL_STEP_REL: f64 = 1e-9;

/// Acceptance requires this much negative margin in the quadratic-form
/// test, so the directly-evaluated sufficient-decrease inequality survives
/// floating-point round-off on both sides: evaluating the objective twice
/// costs roughly `terms · scale · 2⁻⁵²` ≈ 1e-14·scale, three orders of
/// magnitude below this margin.
pub(crate) const ACCEPT_MARGIN_REL: f64 = 1e-10;

/// Outcome counters for one block update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepFlags {
    /// Accepted Newton-PGD steps.
    pub accepted: usize,
    /// Line searches that ran out of trials without an acceptable step.
    pub ls_exhaustions: usize,
    /// Accepted steps where the directly-evaluated sufficient-decrease
    /// inequality failed (should never happen).
    pub decrease_violations: usize,
}

impl StepFlags {
    pub fn merge(&mut self, other: StepFlags) {
        self.accepted += other.accepted;
        self.ls_exhaustions += other.ls_exhaustions;
        self.decrease_violations += other.decrease_violations;
    }
}

/// Gradient of the full-history basis objective: `2 U A − 2 B`.
pub fn basis_gradient(state: &FactorState, view: usize) -> Array2<f64> {
    let vf = &state.views[view];
    basis_gradient_parts(&vf.basis, &vf.accum_a, &vf.accum_b)
}

pub(crate) fn basis_gradient_parts(
    u: &Array2<f64>,
    a: &Array2<f64>,
    b: &Array2<f64>,
) -> Array2<f64> {
    let mut g = u.dot(a);
    g *= 2.0;
    g -= &(b * 2.0);
    g
}

/// Update the basis of one view in place against the given accumulators.
/// The accumulators must already include every chunk the objective should
/// cover (for the persistent state that means the current chunk's
/// contribution has been folded in by the caller).
pub fn update_basis(state: &mut FactorState, view: usize, config: &SolverConfig) -> Result<StepFlags> {
    let vf = &mut state.views[view];
    newton_pgd_basis(
        &mut vf.basis,
        &vf.accum_a,
        &vf.accum_b,
        vf.hist_const,
        config,
    )
}

/// Factor the ridged Hessian `A + ridge·I`, escalating the ridge if the
/// accumulator is numerically singular (early chunks).
fn factor_ridged(a: &Array2<f64>, rel_ridge: f64) -> Result<Cholesky> {
    let k = a.nrows();
    let mean_diag = a.diag().sum() / k as f64;
    let mut ridge = (rel_ridge * mean_diag).max(f64::MIN_POSITIVE);
    for _ in 0..8 {
        let mut ridged = a.clone();
        for i in 0..k {
            ridged[[i, i]] += ridge;
        }
        if let Ok(chol) = Cholesky::factor(ridged.view()) {
            return Ok(chol);
        }
        ridge = (ridge * 1e4).max(1e-12 * (1.0 + mean_diag));
    }
    Err(Error::Numeric {
        chunk: 0,
        msg: "basis Hessian could not be factored even with an escalated ridge".into(),
    })
}

/// Newton-PGD iterations for the quadratic basis objective
/// `tr(U A Uᵀ) − 2⟨U, B⟩ + c`. Returns counters; `u` is updated in place
/// and left unchanged when no acceptable step exists.
pub(crate) fn newton_pgd_basis(
    u: &mut Array2<f64>,
    a: &Array2<f64>,
    b: &Array2<f64>,
    c: f64,
    config: &SolverConfig,
) -> Result<StepFlags> {
    let mut flags = StepFlags::default();
    let mut objective = history_term_parts(u, a, b, c);
    if !objective.is_finite() {
        return Err(Error::Numeric {
            chunk: 0,
            msg: "basis objective is not finite".into(),
        });
    }
    let chol = factor_ridged(a, config.hessian_ridge)?;

    for _ in 0..config.newton_steps {
        let grad = basis_gradient_parts(u, a, b);
        let scale = 1.0 + objective.abs();
        if projected_grad_norm(u.view(), grad.view()) <= config.tol_inner * scale {
            break;
        }
        // Newton direction: ∇ · (2(A + ridge I))⁻¹.
        let mut direction = chol.solve_rows(grad.view());
        direction *= 0.5;

        let step = backtrack_direction(u, a, &grad, &direction, scale, config).or_else(|| {
            // With part of a row pinned at zero, the projected Newton
            // direction restricted to the free coordinates can point
            // uphill and fail every trial. The projected-gradient
            // direction always admits a decrease away from stationarity,
            // so the iteration cannot stall at a non-stationary point.
            let lipschitz = 2.0 * a.diag().sum(); // ≥ 2 λmax(A) for PSD A
            let fallback = &grad * (1.0 / lipschitz.max(f64::MIN_POSITIVE));
            backtrack_direction(u, a, &grad, &fallback, scale, config)
        });
        match step {
            Some((trial, predicted, grad_dot)) => {
                if config.verify_decrease {
                    let after = history_term_parts(&trial, a, b, c);
                    if after - objective > config.sigma * grad_dot {
                        flags.decrease_violations += 1;
                    }
                }
                *u = trial;
                objective += predicted;
                flags.accepted += 1;
            }
            None => {
                flags.ls_exhaustions += 1;
                break;
            }
        }
        if !objective.is_finite() {
            return Err(Error::Numeric {
                chunk: 0,
                msg: "basis objective became non-finite".into(),
            });
        }
    }
    Ok(flags)
}

/// Backtrack along one descent direction, accepting the first projected
/// trial that passes the exact-quadratic sufficient-decrease test.
/// Returns the accepted point with its predicted change and gradient
/// inner product, or `None` when every trial fails.
fn backtrack_direction(
    u: &Array2<f64>,
    a: &Array2<f64>,
    grad: &Array2<f64>,
    direction: &Array2<f64>,
    scale: f64,
    config: &SolverConfig,
) -> Option<(Array2<f64>, f64, f64)> {
    let mut gamma = 1.0;
    for _ in 0..config.max_inner {
        let mut trial = u - &(direction * gamma);
        project_nonneg(&mut trial);
        let delta = &trial - u;
        let grad_dot = frob_dot(grad.view(), delta.view());
        let curv = frob_dot(delta.view(), delta.dot(a).view());
        let predicted = grad_dot + curv; // exact change of the quadratic
        let test = (1.0 - config.sigma) * grad_dot + curv;
        if test <= -ACCEPT_MARGIN_REL * scale && -predicted >= NULL_STEP_REL * scale {
            return Some((trial, predicted, grad_dot));
        }
        gamma *= config.step_decay;
    }
    None
}
