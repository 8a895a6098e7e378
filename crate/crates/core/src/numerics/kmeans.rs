use super::{Matrix, RngState};
use crate::error::{ensure, Result};

pub const DEFAULT_N_INIT: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    pub n_iter: usize,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
}

/// Lloyd's k-means with k-means++ seeding, best of `n_init` restarts.
///
/// Ties in nearest-centroid assignment go to the lowest centroid index; ties
/// in inertia across restarts go to the earliest restart.
pub fn kmeans(
    x: &Matrix,
    k: usize,
    n_init: usize,
    max_iter: usize,
    rng: &mut RngState,
) -> Result<KMeansResult> {
    let n = x.rows();
    ensure!(k >= 1, "k must be at least 1");
    ensure!(k <= n, "k = {k} exceeds the number of samples {n}");
    ensure!(n_init >= 1, "n_init must be at least 1");
    ensure!(x.is_finite(), "kmeans input has non-finite entries");

    let mut best: Option<KMeansResult> = None;
    for _ in 0..n_init {
        let seeds = plus_plus_seeds(x, k, rng);
        let run = lloyd(x, seeds, max_iter);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_seeds(x: &Matrix, k: usize, rng: &mut RngState) -> Matrix {
    let n = x.rows();
    let mut chosen = vec![false; n];
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.below(n);
    chosen[first] = true;
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave the target past the last positive weight.
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            (0..n).find(|&i| !chosen[i]).unwrap_or(0)
        };
        chosen[pick] = true;
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(pick)));
        }
    }
    centroids
}

fn assign(x: &Matrix, centroids: &Matrix, labels: &mut [usize], dists: &mut [f64]) -> f64 {
    let mut inertia = 0.0;
    for i in 0..x.rows() {
        let row = x.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..centroids.rows() {
            let d = sq_dist(row, centroids.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
        dists[i] = best_d;
        inertia += best_d;
    }
    inertia
}

fn lloyd(x: &Matrix, mut centroids: Matrix, max_iter: usize) -> KMeansResult {
    let (n, d) = x.shape();
    let k = centroids.rows();
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut inertia = assign(x, &centroids, &mut labels, &mut dists);
    let mut history = vec![inertia];
    let mut n_iter = 0;
    for _ in 0..max_iter {
        n_iter += 1;
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, v) in sums.row_mut(labels[i]).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            } else {
                // Empty cluster: reseed at the worst-fit point not already used.
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dists[b] >= dists[i] => Some(b),
                        _ => Some(i),
                    })
                    .unwrap_or(0);
                taken[far] = true;
                dists[far] = 0.0;
                centroids.row_mut(c).copy_from_slice(x.row(far));
            }
        }
        let prev = labels.clone();
        inertia = assign(x, &centroids, &mut labels, &mut dists);
        history.push(inertia);
        if labels == prev {
            break;
        }
    }
    KMeansResult {
        labels,
        centroids,
        inertia,
        n_iter,
        inertia_history: history,
    }
}
