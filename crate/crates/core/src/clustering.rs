//! Affinity from the self-expression matrix, normalized spectral clustering,
//! and label-permutation-aware evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::numerics::{hungarian_best_match, kmeans, sym_eig, Matrix, RngState, DEFAULT_MAX_ITER, DEFAULT_N_INIT};

/// Degree floor for isolated nodes in the normalized Laplacian.
pub const DEGREE_FLOOR: f64 = 1e-12;

/// `W = (|C| + |C|ᵀ) / 2`, optionally keeping only the `q` largest
/// magnitudes of each column of `C` first.
pub fn affinity_from_c(c: &Matrix, top_q: Option<usize>) -> Result<Matrix> {
    ensure!(c.is_square(), "C must be square, got {:?}", c.shape());
    ensure!(c.is_finite(), "C has non-finite entries");
    let n = c.rows();
    let mut abs = c.map(f64::abs);
    abs.zero_diag();
    if let Some(q) = top_q {
        ensure!(q >= 1, "affinity_topq must be at least 1");
        for j in 0..n {
            let mut col: Vec<(f64, usize)> = (0..n).map(|i| (abs[(i, j)], i)).collect();
            col.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for &(_, i) in col.iter().skip(q) {
                abs[(i, j)] = 0.0;
            }
        }
    }
    Ok(Matrix::from_fn(n, n, |i, j| 0.5 * (abs[(i, j)] + abs[(j, i)])))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusteringResult {
    /// Cluster of each node, in `0..k`.
    pub labels: Vec<usize>,
    pub k: usize,
    /// The affinity had no edges, so the labels carry no information.
    pub degenerate: bool,
}

/// Ng-Jordan-Weiss spectral clustering.
///
/// The `k` eigenvectors of `D^{-1/2} W D^{-1/2}` with the largest
/// eigenvalues (the smallest of the symmetric Laplacian) are stacked, each
/// row is scaled to unit length (zero rows stay zero), and k-means clusters
/// the rows.
pub fn spectral_cluster(w: &Matrix, k: usize, rng: &mut RngState) -> Result<ClusteringResult> {
    let n = w.rows();
    ensure!(w.is_square(), "affinity must be square");
    ensure!(k >= 2, "k must be at least 2, got {k}");
    ensure!(k <= n, "k = {k} exceeds the node count {n}");
    ensure!(
        w.as_slice().iter().all(|&v| v >= 0.0 && v.is_finite()),
        "affinity must be finite and nonnegative"
    );
    let degenerate = w.max_abs() == 0.0;
    if degenerate {
        log::warn!("affinity matrix is all zero; cluster labels are arbitrary");
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / w.row(i).iter().sum::<f64>().max(DEGREE_FLOOR).sqrt())
        .collect();
    let mut m = Matrix::from_fn(n, n, |i, j| w[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    // Exact symmetry for the eigensolver.
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let eig = sym_eig(&m)?;
    let mut emb = Matrix::from_fn(n, k, |i, c| eig.vectors[(i, n - 1 - c)]);
    for i in 0..n {
        let norm = emb.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            emb.row_mut(i).iter_mut().for_each(|v| *v /= norm);
        }
    }
    let km = kmeans(&emb, k, DEFAULT_N_INIT, DEFAULT_MAX_ITER, rng)?;
    Ok(ClusteringResult {
        labels: km.labels,
        k,
        degenerate,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmiNorm {
    #[default]
    Arithmetic,
    Geometric,
    Max,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub oa: f64,
    pub nmi: f64,
    pub kappa: f64,
    pub nmi_norm: NmiNorm,
    pub samples: usize,
    /// Accuracy within each true class after alignment.
    pub per_class_accuracy: Vec<f64>,
    /// `matched_permutation[p]` is the true class matched to cluster `p`.
    pub matched_permutation: Vec<usize>,
    /// Counts, rows = predicted cluster, columns = true class.
    pub confusion: Vec<Vec<u64>>,
}

impl MetricsReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("metrics serialize")
    }
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

/// OA, NMI and Kappa of `pred` against `truth`; both are 0-based labels.
pub fn evaluate(pred: &[usize], truth: &[usize], norm: NmiNorm) -> Result<MetricsReport> {
    ensure!(
        pred.len() == truth.len(),
        "prediction has {} labels, truth has {}",
        pred.len(),
        truth.len()
    );
    ensure!(!pred.is_empty(), "cannot evaluate an empty labeling");
    let kp = pred.iter().max().unwrap() + 1;
    let kt = truth.iter().max().unwrap() + 1;
    let k = kp.max(kt);
    let n = pred.len() as f64;
    let mut conf = Matrix::zeros(k, k);
    for (&p, &t) in pred.iter().zip(truth) {
        conf[(p, t)] += 1.0;
    }
    let assign = hungarian_best_match(&conf)?;
    let matched: f64 = (0..k).map(|p| conf[(p, assign.permutation[p])]).sum();
    let oa = matched / n;

    let rows: Vec<f64> = (0..k).map(|p| conf.row(p).iter().sum()).collect();
    let cols: Vec<f64> = (0..k).map(|t| conf.column(t).iter().sum()).collect();
    let mut mi = 0.0;
    for p in 0..k {
        for t in 0..k {
            let c = conf[(p, t)];
            if c > 0.0 {
                mi += c / n * (n * c / (rows[p] * cols[t])).ln();
            }
        }
    }
    let (hp, ht) = (entropy(&rows, n), entropy(&cols, n));
    let denom = match norm {
        NmiNorm::Arithmetic => 0.5 * (hp + ht),
        NmiNorm::Geometric => (hp * ht).sqrt(),
        NmiNorm::Max => hp.max(ht),
    };
    let nmi = if hp == 0.0 && ht == 0.0 {
        1.0
    } else if denom > 0.0 {
        (mi / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };

    // Chance agreement of the aligned labeling: cluster p acts as class π(p).
    let p_e: f64 = (0..k).map(|p| rows[p] * cols[assign.permutation[p]]).sum::<f64>() / (n * n);
    let kappa = if (1.0 - p_e).abs() < 1e-15 {
        if oa == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (oa - p_e) / (1.0 - p_e)
    };

    let mut inverse = vec![0; k];
    for (p, &t) in assign.permutation.iter().enumerate() {
        inverse[t] = p;
    }
    let per_class_accuracy = (0..kt)
        .map(|t| if cols[t] > 0.0 { conf[(inverse[t], t)] / cols[t] } else { 0.0 })
        .collect();
    Ok(MetricsReport {
        oa,
        nmi,
        kappa,
        nmi_norm: norm,
        samples: pred.len(),
        per_class_accuracy,
        matched_permutation: assign.permutation,
        confusion: (0..k).map(|p| conf.row(p).iter().map(|&c| c as u64).collect()).collect(),
    })
}
