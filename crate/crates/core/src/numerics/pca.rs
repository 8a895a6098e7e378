use super::{sym_eig, Matrix};
use crate::error::{ensure, Result};

#[derive(Clone, Debug)]
pub struct Pca {
    /// `n_samples × n_components` projections of the centered data.
    pub scores: Matrix,
    /// `n_components × n_features`, orthonormal rows.
    pub components: Matrix,
    /// Variance along each component, non-increasing.
    pub explained_variance: Vec<f64>,
    pub mean: Vec<f64>,
}

impl Pca {
    /// Maps scores back to feature space.
    pub fn reconstruct(&self) -> Matrix {
        let mut x = self.scores.matmul(&self.components);
        for i in 0..x.rows() {
            for (v, m) in x.row_mut(i).iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        x
    }
}

/// Principal component analysis through the covariance eigendecomposition.
///
/// Each component's sign is fixed so that its largest-magnitude loading is
/// positive, which keeps outputs deterministic across runs.
pub fn pca_fit_transform(x: &Matrix, n_components: usize) -> Result<Pca> {
    let (n, p) = x.shape();
    ensure!(n > 0 && p > 0, "pca needs a non-empty matrix");
    ensure!(
        n_components >= 1 && n_components <= n.min(p),
        "n_components {n_components} must be in 1..={}",
        n.min(p)
    );
    ensure!(x.is_finite(), "pca input has non-finite entries");

    let mut mean = vec![0.0; p];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = Matrix::from_fn(n, p, |i, j| x[(i, j)] - mean[j]);

    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let mut cov = centered.t_matmul(&centered).scale(1.0 / denom);
    // Exact symmetry for the eigensolver.
    for i in 0..p {
        for j in i + 1..p {
            let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
    }
    let eig = sym_eig(&cov)?;

    let mut components = Matrix::zeros(n_components, p);
    let mut explained_variance = Vec::with_capacity(n_components);
    for c in 0..n_components {
        let src = p - 1 - c;
        let mut v = eig.vectors.column(src);
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.row_mut(c).copy_from_slice(&v);
        explained_variance.push(eig.values[src].max(0.0));
    }
    let scores = centered.matmul_t(&components);
    Ok(Pca {
        scores,
        components,
        explained_variance,
        mean,
    })
}
