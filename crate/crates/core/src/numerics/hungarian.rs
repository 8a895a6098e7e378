use super::Matrix;
use crate::error::{ensure, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// `permutation[i]` is the column matched to row `i`.
    pub permutation: Vec<usize>,
    pub score: f64,
}

/// Permutation maximizing `Σᵢ m[i][π(i)]` over a square nonnegative matrix.
///
/// Shortest augmenting path with dual potentials, `O(k³)`.
pub fn hungarian_best_match(m: &Matrix) -> Result<Assignment> {
    ensure!(m.is_square(), "assignment needs a square matrix, got {:?}", m.shape());
    ensure!(
        m.as_slice().iter().all(|&x| x >= 0.0 && x.is_finite()),
        "assignment matrix must be finite and nonnegative"
    );
    let n = m.rows();
    if n == 0 {
        return Ok(Assignment {
            permutation: Vec::new(),
            score: 0.0,
        });
    }
    // Minimize the negated profit; 1-based bookkeeping with a dummy column 0.
    let cost = |i: usize, j: usize| -m[(i - 1, j - 1)];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut permutation = vec![0usize; n];
    for j in 1..=n {
        permutation[p[j] - 1] = j - 1;
    }
    let score = permutation.iter().enumerate().map(|(i, &j)| m[(i, j)]).sum();
    Ok(Assignment { permutation, score })
}
