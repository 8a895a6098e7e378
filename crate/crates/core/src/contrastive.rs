//! Node-level and graph-level InfoNCE losses with analytic gradients, and
//! the feature-shuffling corruption that supplies graph-level negatives.

use serde::{Deserialize, Serialize};

use crate::encoder::{attention_pool, gcn_forward, AttentionParams, GcnParams, GraphRepresentation, NodeEmbeddings};
use crate::error::{ensure, Error, Result};
use crate::numerics::{Matrix, RngState};
use crate::views::GraphView;

pub const DEFAULT_TAU: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterViewPairing {
    /// Contrast the per-family mean embeddings.
    Mean,
    /// Average over the four spectral/texture augmentation pairs.
    AllPairs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContrastiveConfig {
    pub tau: f64,
    pub inter_view_pairing: InterViewPairing,
    /// Floor on embedding norms before cosine similarity. ReLU outputs can
    /// be exactly zero; the floor keeps such rows usable during training.
    pub norm_eps: f64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            inter_view_pairing: InterViewPairing::Mean,
            norm_eps: 1e-8,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.tau >= MIN_TAU && self.tau.is_finite(),
            "tau must be at least {MIN_TAU}, got {}",
            self.tau
        );
        ensure!(self.norm_eps >= 0.0, "norm_eps must be nonnegative");
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct NodeLoss {
    pub value: f64,
    pub grad_a: Matrix,
    pub grad_b: Matrix,
}

/// Divisor of `v` when normalizing: its norm, floored at `eps`. Below the
/// floor the map is linear (`v / eps`) rather than a projection.
#[derive(Clone, Copy, Debug)]
struct RowNorm {
    value: f64,
    floored: bool,
}

fn row_norm(v: &[f64], eps: f64) -> RowNorm {
    let raw = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    RowNorm {
        value: raw.max(eps),
        floored: raw < eps,
    }
}

/// `du` to `dv` through `u = v / max(‖v‖, eps)`.
fn unit_backward_into(dv: &mut [f64], du: &[f64], u: &[f64], n: RowNorm) {
    if n.floored {
        for (g, d) in dv.iter_mut().zip(du) {
            *g = d / n.value;
        }
        return;
    }
    let dot: f64 = u.iter().zip(du).map(|(a, b)| a * b).sum();
    for ((g, d), x) in dv.iter_mut().zip(du).zip(u) {
        *g = (d - x * dot) / n.value;
    }
}

fn normalize_rows(z: &Matrix, eps: f64, which: &str) -> Result<(Matrix, Vec<RowNorm>)> {
    let mut u = z.clone();
    let mut norms = Vec::with_capacity(z.rows());
    for i in 0..z.rows() {
        let n = row_norm(z.row(i), eps);
        if !(n.value > 0.0) || !n.value.is_finite() {
            return Err(Error::Degenerate(format!(
                "embedding row {i} of {which} has norm {}; cosine similarity undefined",
                n.value
            )));
        }
        u.row_mut(i).iter_mut().for_each(|v| *v /= n.value);
        norms.push(n);
    }
    Ok((u, norms))
}

fn unnormalize_grad(du: &Matrix, u: &Matrix, norms: &[RowNorm]) -> Matrix {
    let mut dz = Matrix::zeros(du.rows(), du.cols());
    for i in 0..u.rows() {
        unit_backward_into(dz.row_mut(i), du.row(i), u.row(i), norms[i]);
    }
    dz
}

/// Smallest temperature for which the fixed log-sum-exp shift cannot
/// underflow every term of a denominator.
pub const MIN_TAU: f64 = 1.0 / 350.0;

/// In place: `exp((cos - 1) / τ)` on the strict upper triangle of a cosine
/// Gram matrix, mirrored below, zero diagonal. One exponential per pair.
fn sym_exp_in_place(g: &mut Matrix, inv_tau: f64) {
    let n = g.rows();
    let d = g.as_mut_slice();
    for i in 0..n {
        d[i * n + i] = 0.0;
        for v in &mut d[i * n + i + 1..(i + 1) * n] {
            *v = ((*v - 1.0) * inv_tau).exp();
        }
    }
    const B: usize = 32;
    for bi in (0..n).step_by(B) {
        for bk in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                for k in bk.max(i + 1)..(bk + B).min(n) {
                    d[k * n + i] = d[i * n + k];
                }
            }
        }
    }
}

/// Symmetric node InfoNCE between two aligned embedding sets.
///
/// Anchor `a_i` has positive `b_i`; its negatives are every `b_k` with
/// `k != i` and every `a_k` with `k != i`. Both directions are averaged, so
/// the loss is `(1/2N) Σ_i [l(a_i, b_i) + l(b_i, a_i)]`.
///
/// Cosine logits never exceed `1/τ`, so every exponential is taken relative
/// to that bound and shared by the two anchors that use it.
pub fn node_contrast(za: &Matrix, zb: &Matrix, tau: f64) -> Result<NodeLoss> {
    node_contrast_eps(za, zb, tau, 0.0)
}

/// [`node_contrast`] with row norms floored at `eps`. With `eps = 0` a zero
/// row is an error; with `eps > 0` it is treated as a zero unit vector.
pub fn node_contrast_eps(za: &Matrix, zb: &Matrix, tau: f64, eps: f64) -> Result<NodeLoss> {
    ensure!(za.shape() == zb.shape(), "node_contrast inputs differ in shape: {:?} vs {:?}", za.shape(), zb.shape());
    ensure!(tau >= MIN_TAU && tau.is_finite(), "tau must be at least {MIN_TAU}, got {tau}");
    let n = za.rows();
    ensure!(n >= 1, "node_contrast needs at least one node");
    let (ua, na) = normalize_rows(za, eps, "the first view")?;
    let (ub, nb) = normalize_rows(zb, eps, "the second view")?;
    let inv_tau = 1.0 / tau;
    // Every exponential is relative to the largest possible logit, 1/τ.
    let mut e_ab = ua.matmul_t(&ub);
    let pos_cos: Vec<f64> = (0..n).map(|i| e_ab[(i, i)]).collect();
    e_ab.as_mut_slice().iter_mut().for_each(|v| *v = ((*v - 1.0) * inv_tau).exp());
    let mut e_aa = ua.matmul_t(&ua);
    sym_exp_in_place(&mut e_aa, inv_tau);
    let mut e_bb = ub.matmul_t(&ub);
    sym_exp_in_place(&mut e_bb, inv_tau);

    let mut den_a = vec![0.0; n];
    let mut den_b = vec![0.0; n];
    for i in 0..n {
        den_a[i] = e_ab.row(i).iter().sum::<f64>() + e_aa.row(i).iter().sum::<f64>();
        den_b[i] += e_bb.row(i).iter().sum::<f64>();
        for (k, v) in e_ab.row(i).iter().enumerate() {
            den_b[k] += v;
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        total += den_a[i].ln() + den_b[i].ln() + 2.0 * (1.0 - pos_cos[i]) * inv_tau;
    }
    let scale = 1.0 / (2.0 * n as f64);
    let value = total * scale;

    // d(loss)/d(logit), up to the common 1/(2N) factor, built in place.
    let inv_a: Vec<f64> = den_a.iter().map(|d| 1.0 / d).collect();
    let inv_b: Vec<f64> = den_b.iter().map(|d| 1.0 / d).collect();
    for (i, row) in e_ab.as_mut_slice().chunks_exact_mut(n).enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v *= inv_a[i] + inv_b[k];
        }
        row[i] -= 2.0;
    }
    for (e, inv) in [(&mut e_aa, &inv_a), (&mut e_bb, &inv_b)] {
        for (i, row) in e.as_mut_slice().chunks_exact_mut(n).enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v *= inv[i] + inv[k];
            }
        }
    }
    let k = scale * inv_tau;
    let du_a = e_ab.matmul(&ub).add(&e_aa.matmul(&ua)).scale(k);
    let du_b = e_ab.t_matmul(&ua).add(&e_bb.matmul(&ub)).scale(k);
    Ok(NodeLoss {
        value,
        grad_a: unnormalize_grad(&du_a, &ua, &na),
        grad_b: unnormalize_grad(&du_b, &ub, &nb),
    })
}

#[derive(Clone, Debug)]
pub struct GraphLoss {
    pub value: f64,
    /// Gradients for each positive pair, in input order.
    pub grad_pos: Vec<(Vec<f64>, Vec<f64>)>,
    pub grad_neg: Vec<Vec<f64>>,
}

fn unit(v: &[f64], eps: f64) -> Result<(Vec<f64>, RowNorm)> {
    let n = row_norm(v, eps);
    if !(n.value > 0.0) || !n.value.is_finite() {
        return Err(Error::Degenerate(format!("graph representation has norm {}", n.value)));
    }
    Ok((v.iter().map(|x| x / n.value).collect(), n))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit_backward(du: &[f64], u: &[f64], n: RowNorm) -> Vec<f64> {
    let mut dv = vec![0.0; du.len()];
    unit_backward_into(&mut dv, du, u, n);
    dv
}

/// Graph-level InfoNCE. Each positive pair `(s_i, s_j)` contributes
/// `-log(exp(ŝ_i·ŝ_j/τ) / (exp(ŝ_i·ŝ_j/τ) + Σ_n exp(ŝ_i·ñ/τ)))`, with `s_i` as
/// the anchor and all vectors unit-normalized; the loss is the mean over pairs.
pub fn graph_contrast(pos: &[(&[f64], &[f64])], neg: &[&[f64]], tau: f64) -> Result<GraphLoss> {
    graph_contrast_eps(pos, neg, tau, 0.0)
}

/// [`graph_contrast`] with vector norms floored at `eps`, so an all-zero
/// representation contributes zero similarity instead of failing.
pub fn graph_contrast_eps(pos: &[(&[f64], &[f64])], neg: &[&[f64]], tau: f64, eps: f64) -> Result<GraphLoss> {
    ensure!(!pos.is_empty(), "graph_contrast needs at least one positive pair");
    ensure!(tau > 0.0, "tau must be positive");
    let d = pos[0].0.len();
    ensure!(
        pos.iter().all(|(a, b)| a.len() == d && b.len() == d) && neg.iter().all(|v| v.len() == d),
        "graph_contrast vectors differ in length"
    );
    let mut grad_pos: Vec<(Vec<f64>, Vec<f64>)> = pos.iter().map(|_| (vec![0.0; d], vec![0.0; d])).collect();
    let mut grad_neg = vec![vec![0.0; d]; neg.len()];
    if neg.is_empty() {
        return Ok(GraphLoss {
            value: 0.0,
            grad_pos,
            grad_neg,
        });
    }
    let negs: Vec<(Vec<f64>, RowNorm)> = neg.iter().map(|v| unit(v, eps)).collect::<Result<_>>()?;
    let mut du_neg = vec![vec![0.0; d]; neg.len()];
    let w = 1.0 / pos.len() as f64;
    let mut total = 0.0;
    for (p, (si, sj)) in pos.iter().enumerate() {
        let (ui, ni) = unit(si, eps)?;
        let (uj, nj) = unit(sj, eps)?;
        let mut logits = vec![dot(&ui, &uj) / tau];
        logits.extend(negs.iter().map(|(un, _)| dot(&ui, un) / tau));
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let den: f64 = logits.iter().map(|l| (l - top).exp()).sum();
        total += top + den.ln() - logits[0];
        // d/dlogit: softmax minus one-hot at the positive.
        let mut g: Vec<f64> = logits.iter().map(|l| (l - top).exp() / den).collect();
        g[0] -= 1.0;
        let mut du_i = vec![0.0; d];
        let mut du_j = vec![0.0; d];
        for c in 0..d {
            du_i[c] += g[0] * uj[c];
            du_j[c] += g[0] * ui[c];
        }
        for (n, (un, _)) in negs.iter().enumerate() {
            for c in 0..d {
                du_i[c] += g[n + 1] * un[c];
                du_neg[n][c] += w * g[n + 1] * ui[c] / tau;
            }
        }
        let scale = w / tau;
        du_i.iter_mut().for_each(|v| *v *= scale);
        du_j.iter_mut().for_each(|v| *v *= scale);
        grad_pos[p] = (unit_backward(&du_i, &ui, ni), unit_backward(&du_j, &uj, nj));
    }
    for (n, (un, norm)) in negs.iter().enumerate() {
        grad_neg[n] = unit_backward(&du_neg[n], un, *norm);
    }
    Ok(GraphLoss {
        value: total * w,
        grad_pos,
        grad_neg,
    })
}

/// A negative global representation: the view's node features shuffled
/// across nodes, encoded on the unchanged graph, then pooled.
#[derive(Clone, Debug)]
pub struct Corruption {
    pub permutation: Vec<usize>,
    pub view: GraphView,
    pub embeddings: NodeEmbeddings,
    pub representation: GraphRepresentation,
}

pub fn corrupt_graph_representation(
    view: &GraphView,
    gcn: &GcnParams,
    att: &AttentionParams,
    rng: &mut RngState,
) -> Result<Corruption> {
    ensure!(view.num_nodes() >= 2, "corruption needs at least two nodes");
    let permutation = rng.permutation(view.num_nodes());
    let shuffled = view.with_features(view.features.select_rows(&permutation));
    let embeddings = gcn_forward(&shuffled, gcn, view.augmentation_id)?;
    let representation = attention_pool(&embeddings.z, att)?;
    Ok(Corruption {
        permutation,
        view: shuffled,
        embeddings,
        representation,
    })
}
