//! Brute-force references for the production kernels. Nothing here calls
//! library code beyond `Matrix`.

use mlgsc_core::Matrix;

pub const FD_STEP: f64 = 1e-6;
pub const FD_TOL: f64 = 1e-5;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for k in 0..a.len() {
        ab += a[k] * b[k];
        aa += a[k] * a[k];
        bb += b[k] * b[k];
    }
    ab / (aa.sqrt() * bb.sqrt())
}

/// One anchor's term: positive in the other view, negatives everywhere else.
fn anchor_term(own: &Matrix, other: &Matrix, i: usize, tau: f64) -> f64 {
    let pos = (cosine(own.row(i), other.row(i)) / tau).exp();
    let mut den = 0.0;
    for k in 0..own.rows() {
        den += (cosine(own.row(i), other.row(k)) / tau).exp();
        if k != i {
            den += (cosine(own.row(i), own.row(k)) / tau).exp();
        }
    }
    -(pos / den).ln()
}

pub fn naive_node_contrast(za: &Matrix, zb: &Matrix, tau: f64) -> f64 {
    let n = za.rows();
    let mut total = 0.0;
    for i in 0..n {
        total += anchor_term(za, zb, i, tau);
        total += anchor_term(zb, za, i, tau);
    }
    total / (2.0 * n as f64)
}

pub fn naive_graph_contrast(pos: &[(Vec<f64>, Vec<f64>)], neg: &[Vec<f64>], tau: f64) -> f64 {
    if neg.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (a, b) in pos {
        let num = (cosine(a, b) / tau).exp();
        let mut den = num;
        for n in neg {
            den += (cosine(a, n) / tau).exp();
        }
        total -= (num / den).ln();
    }
    total / pos.len() as f64
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn finite_diff_grad(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a - n| / max(1e-8, |a| + |n|)` over coordinates.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (1e-8f64).max(a.abs() + n.abs()))
        .fold(0.0, f64::max)
}

pub const EXHAUSTIVE_MAX_K: usize = 8;

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Best accuracy over every relabeling of the predicted clusters. Labels are
/// `0..k` on both sides.
pub fn exhaustive_oa(pred: &[usize], truth: &[usize]) -> Result<f64, String> {
    let k = pred.iter().chain(truth).copied().max().map_or(0, |m| m + 1);
    if k > EXHAUSTIVE_MAX_K {
        return Err(format!("exhaustive OA is capped at k = {EXHAUSTIVE_MAX_K}, got {k}"));
    }
    let best = permutations(k)
        .iter()
        .map(|perm| pred.iter().zip(truth).filter(|(p, t)| perm[**p] == **t).count())
        .max()
        .unwrap_or(0);
    Ok(best as f64 / pred.len() as f64)
}

/// All-pairs kNN with an explicit full sort.
pub fn naive_knn(x: &Matrix, k: usize) -> Matrix {
    let n = x.rows();
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        let mut d: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let mut s = 0.0;
                for c in 0..x.cols() {
                    s += (x[(i, c)] - x[(j, c)]).powi(2);
                }
                (s, j)
            })
            .collect();
        d.sort_by(|p, q| p.partial_cmp(q).unwrap());
        for &(_, j) in d.iter().take(k) {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
    }
    a
}
