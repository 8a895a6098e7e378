//! Dense linear algebra and combinatorial kernels shared by the pipeline.

mod hungarian;
mod kmeans;
mod linalg;
mod matrix;
mod pca;
mod rng;

pub use hungarian::{hungarian_best_match, Assignment};
pub use kmeans::{kmeans, KMeansResult, DEFAULT_MAX_ITER, DEFAULT_N_INIT};
pub use linalg::{cholesky, cholesky_solve, ridge_solve, sym_eig, SymEigen, QL_MAX_ITER, SYMMETRY_TOL};
pub use matrix::{CsrMatrix, Matrix};
pub use pca::{pca_fit_transform, Pca};
pub use rng::RngState;

/// Glorot-uniform initialization for a `fan_in × fan_out` weight matrix.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut RngState) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_fn(fan_in, fan_out, |_, _| rng.uniform_range(-limit, limit))
}

/// Cheap content hash over matrices, used to detect stale forward caches.
pub(crate) fn fingerprint(mats: &[&Matrix]) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for m in mats {
        m.shape().hash(&mut h);
        for v in m.as_slice() {
            v.to_bits().hash(&mut h);
        }
    }
    h.finish()
}
