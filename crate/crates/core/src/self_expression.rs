//! Self-expression layer: a trainable `N × N` coefficient matrix `C`, zero on
//! the diagonal, that rebuilds every node from a graph-smoothed dictionary
//! of the others.
//!
//! With `X = Fᵀ` (features by nodes) and dictionary `Z = X Ā`:
//!
//! ```text
//! L = ½ ‖Z C − X‖²_F + (λ/2) ‖C‖²_F
//! ```
//!
//! Internally everything stays node-major: `P = Āᵀ F = Zᵀ` and the residual is
//! kept transposed as `R = Cᵀ P − F`.

use crate::error::{ensure, Error, Result};
use crate::numerics::{cholesky, cholesky_solve, Matrix};

pub const DEFAULT_LAMBDA: f64 = 100.0;

/// Size cap for the column-by-column reference solver.
pub const RIDGE_ORACLE_MAX_N: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct SelfExpressionState {
    pub c: Matrix,
    pub lambda: f64,
}

impl SelfExpressionState {
    /// Every off-diagonal entry starts at `fill`.
    pub fn new(n: usize, lambda: f64, fill: f64) -> Result<Self> {
        ensure!(lambda > 0.0 && lambda.is_finite(), "lambda must be positive, got {lambda}");
        ensure!(fill.is_finite(), "C initial value must be finite");
        let mut c = Matrix::filled(n, n, fill);
        c.zero_diag();
        Ok(Self { c, lambda })
    }

    pub fn check_diagonal(&self) -> Result<()> {
        if let Some(i) = (0..self.c.rows()).find(|&i| self.c[(i, i)] != 0.0) {
            return Err(Error::Invariant(format!(
                "diag(C) must be zero, found C[{i},{i}] = {}",
                self.c[(i, i)]
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SelfExpressionLoss {
    pub value: f64,
    /// Diagonal already zeroed.
    pub grad_c: Matrix,
    pub grad_f: Matrix,
}

pub fn self_expression_loss(f: &Matrix, a_bar: &Matrix, state: &SelfExpressionState) -> Result<SelfExpressionLoss> {
    let n = f.rows();
    ensure!(a_bar.shape() == (n, n), "Ā is {:?} but there are {n} nodes", a_bar.shape());
    ensure!(state.c.shape() == (n, n), "C is {:?} but there are {n} nodes", state.c.shape());
    state.check_diagonal()?;
    let c = &state.c;
    let p = a_bar.t_matmul(f);
    let r = c.t_matmul(&p).sub(f);
    let fro_c = c.frobenius_norm();
    let value = 0.5 * r.frobenius_norm().powi(2) + 0.5 * state.lambda * fro_c * fro_c;
    let mut grad_c = p.matmul_t(&r);
    grad_c.add_scaled(c, state.lambda);
    grad_c.zero_diag();
    let grad_f = a_bar.matmul(&c.matmul(&r)).sub(&r);
    Ok(SelfExpressionLoss { value, grad_c, grad_f })
}

/// Exact minimizer of the masked ridge problem, one column at a time: column
/// `j` solves the normal equations over every atom except `j`.
///
/// `z` and `x` are `d × N` (features by nodes).
pub fn masked_ridge_oracle(z: &Matrix, x: &Matrix, lambda: f64) -> Result<Matrix> {
    let n = z.cols();
    ensure!(x.shape() == z.shape(), "dictionary {:?} and targets {:?} differ in shape", z.shape(), x.shape());
    ensure!(lambda > 0.0, "lambda must be positive");
    ensure!(n <= RIDGE_ORACLE_MAX_N, "masked ridge oracle is capped at {RIDGE_ORACLE_MAX_N} nodes, got {n}");
    let gram = z.t_matmul(z);
    let zx = z.t_matmul(x);
    let mut c = Matrix::zeros(n, n);
    for j in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&i| i != j).collect();
        if keep.is_empty() {
            continue;
        }
        let g = Matrix::from_fn(keep.len(), keep.len(), |a, b| {
            gram[(keep[a], keep[b])] + if a == b { lambda } else { 0.0 }
        });
        let rhs = Matrix::from_fn(keep.len(), 1, |a, _| zx[(keep[a], j)]);
        let sol = cholesky_solve(&cholesky(&g)?, &rhs);
        for (a, &i) in keep.iter().enumerate() {
            c[(i, j)] = sol[(a, 0)];
        }
    }
    Ok(c)
}
