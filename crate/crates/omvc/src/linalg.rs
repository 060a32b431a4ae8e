//! Small dense linear-algebra helpers for the K x K subproblems.
//!
//! The Hessians that appear in the block updates are symmetric positive
//! (semi-)definite K x K matrices with K equal to the cluster count, so a
//! plain Cholesky factorization covers every inverse the solver needs.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Array2<f64>,
}

impl Cholesky {
    /// Factor a symmetric positive definite matrix. Only the lower triangle
    /// of `m` is read.
    pub fn factor(m: ArrayView2<'_, f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::Dimension(format!(
                "cholesky needs a square matrix, got {}x{}",
                n,
                m.ncols()
            )));
        }
        let mut lower = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let mut sum = m[[i, j]];
                for k in 0..j {
                    sum -= lower[[i, k]] * lower[[j, k]];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(Error::InvalidValue(format!(
                            "matrix is not positive definite (pivot {} = {:e})",
                            i, sum
                        )));
                    }
                    lower[[i, j]] = sum.sqrt();
                } else {
                    lower[[i, j]] = sum / lower[[j, j]];
                }
            }
        }
        Ok(Cholesky { lower })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// Solve `M x = b` for one right-hand side.
    pub fn solve_vec(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        let l = &self.lower;
        // forward: L y = b
        let mut y = Array1::<f64>::zeros(n);
        for i in 0..n {
            let mut sum = b[i];
            for k in 0..i {
                sum -= l[[i, k]] * y[k];
            }
            y[i] = sum / l[[i, i]];
        }
        // backward: L^T x = y
        let mut x = Array1::<f64>::zeros(n);
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in i + 1..n {
                sum -= l[[k, i]] * x[k];
            }
            x[i] = sum / l[[i, i]];
        }
        x
    }

    /// Compute `G M^{-1}` for a row-major stack of right-hand sides, i.e.
    /// solve `M x = g` for every row `g` of `G`. This is the shape used by
    /// the Newton steps, where the Hessian acts on the K-dimensional row
    /// space of the factor matrices.
    pub fn solve_rows(&self, g: ArrayView2<'_, f64>) -> Array2<f64> {
        debug_assert_eq!(g.ncols(), self.dim());
        let mut out = Array2::<f64>::zeros(g.raw_dim());
        for (mut row_out, row_in) in out.outer_iter_mut().zip(g.outer_iter()) {
            row_out.assign(&self.solve_vec(row_in));
        }
        out
    }
}

/// Frobenius inner product `<a, b>`: the sum of the component-wise product.
pub fn frob_dot(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    debug_assert_eq!(a.raw_dim(), b.raw_dim());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn frob_norm_sq(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Clamp negatives to zero, the projection onto the nonnegative orthant.
pub fn project_nonneg(m: &mut Array2<f64>) {
    m.mapv_inplace(|x| if x > 0.0 { x } else { 0.0 });
}

/// Frobenius norm of the projected gradient: at entries sitting on the
/// boundary (x == 0) only a negative gradient component counts, elsewhere
/// the raw gradient does.
pub fn projected_grad_norm(x: ArrayView2<'_, f64>, grad: ArrayView2<'_, f64>) -> f64 {
    debug_assert_eq!(x.raw_dim(), grad.raw_dim());
    let mut sum = 0.0;
    for (&xi, &gi) in x.iter().zip(grad.iter()) {
        let p = if xi > 0.0 { gi } else { gi.min(0.0) };
        sum += p * p;
    }
    sum.sqrt()
}

/// Max-norm of the elementwise `min(x, grad)` KKT residual for the
/// constraint `x >= 0`.
pub fn kkt_residual_inf(x: ArrayView2<'_, f64>, grad: ArrayView2<'_, f64>) -> f64 {
    debug_assert_eq!(x.raw_dim(), grad.raw_dim());
    x.iter()
        .zip(grad.iter())
        .map(|(&xi, &gi)| xi.min(gi).abs())
        .fold(0.0, f64::max)
}
