use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{ensure, Result};
use crate::numerics::{Matrix, RngState};

/// Symmetric binary kNN graph over the rows of `features`.
///
/// Row `i` links to its `k` nearest rows by Euclidean distance (itself
/// excluded, ties to the lower index); the result is the union of those
/// directed edges.
pub fn knn_adjacency(features: &Matrix, k: usize) -> Result<Matrix> {
    let n = features.rows();
    ensure!(k >= 1, "knn k must be at least 1");
    ensure!(k < n, "knn k = {k} must be smaller than the node count {n}");
    ensure!(features.is_finite(), "knn features contain non-finite values");

    let neighbors: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = features.row(i);
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d: f64 = xi
                        .iter()
                        .zip(features.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (d, j)
                })
                .collect();
            let by_dist = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
                a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
            };
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, by_dist);
                cand.truncate(k);
            }
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let mut a = Matrix::zeros(n, n);
    for (i, nb) in neighbors.iter().enumerate() {
        for &j in nb {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
    }
    Ok(a)
}

/// Drops each undirected edge independently with probability `delta`.
///
/// One uniform draw per existing edge, visited in upper-triangle row-major
/// order, so the result depends only on the graph and the stream.
pub fn augment_drop_edges(a: &Matrix, delta: f64, rng: &mut RngState) -> Result<Matrix> {
    ensure!((0.0..1.0).contains(&delta), "drop probability {delta} not in [0, 1)");
    ensure!(a.is_square(), "adjacency must be square");
    let n = a.rows();
    let mut out = a.clone();
    if delta == 0.0 {
        return Ok(out);
    }
    for i in 0..n {
        for j in i + 1..n {
            if a[(i, j)] != 0.0 && rng.uniform() < delta {
                out[(i, j)] = 0.0;
                out[(j, i)] = 0.0;
            }
        }
    }
    Ok(out)
}

/// `D̃^{-1/2} (I + A) D̃^{-1/2}` with `D̃` the degree matrix of `I + A`.
pub fn normalize_adjacency(a: &Matrix) -> Result<Matrix> {
    ensure!(a.is_square(), "adjacency must be square");
    ensure!(a.is_symmetric(0.0), "adjacency must be symmetric");
    ensure!(a.diag().iter().all(|&d| d == 0.0), "adjacency must have a zero diagonal");
    let n = a.rows();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / (1.0 + a.row(i).iter().sum::<f64>()).sqrt())
        .collect();
    Ok(Matrix::from_fn(n, n, |i, j| {
        let v = if i == j { 1.0 } else { a[(i, j)] };
        if v == 0.0 {
            0.0
        } else {
            v * inv_sqrt[i] * inv_sqrt[j]
        }
    }))
}
