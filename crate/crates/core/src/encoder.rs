//! Two-layer GCN encoder and attention pooling, with hand-written backward
//! passes.
//!
//! One `GcnParams` per feature family is shared by both augmentations of that
//! family. Forward passes return caches; a backward pass refuses a cache whose
//! parameter fingerprint no longer matches.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::numerics::{fingerprint, glorot_uniform, Matrix, RngState};
use crate::views::{Family, GraphView};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub hidden_dim: usize,
    pub output_dim: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            output_dim: 32,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.hidden_dim >= 1 && self.output_dim >= 1,
            "encoder dimensions must be positive"
        );
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcnParams {
    pub w1: Matrix,
    pub w2: Matrix,
    pub family: Family,
}

impl GcnParams {
    pub fn init(d_in: usize, cfg: &EncoderConfig, family: Family, rng: &mut RngState) -> Self {
        Self {
            w1: glorot_uniform(d_in, cfg.hidden_dim, rng),
            w2: glorot_uniform(cfg.hidden_dim, cfg.output_dim, rng),
            family,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.cols()
    }

    fn fingerprint(&self) -> u64 {
        fingerprint(&[&self.w1, &self.w2])
    }
}

#[derive(Clone, Debug)]
struct GcnCache {
    /// `Â X`
    ax: Matrix,
    h1_pre: Matrix,
    /// `Â H1`
    ah1: Matrix,
    z_pre: Matrix,
    params: u64,
    nodes: usize,
}

/// Output of one encoder pass over one view.
#[derive(Clone, Debug)]
pub struct NodeEmbeddings {
    pub z: Matrix,
    pub view_id: u8,
    cache: GcnCache,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcnGrads {
    pub w1: Matrix,
    pub w2: Matrix,
    /// Gradient with respect to the view's node features.
    pub x: Matrix,
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// Subgradient mask of ReLU, zero at zero.
fn relu_mask(grad: &Matrix, pre: &Matrix) -> Matrix {
    grad.zip_map(pre, |g, p| if p > 0.0 { g } else { 0.0 })
}

/// `Z = ReLU(Â · ReLU(Â X W1) · W2)`.
pub fn gcn_forward(view: &GraphView, p: &GcnParams, view_id: u8) -> Result<NodeEmbeddings> {
    ensure!(
        view.feature_dim() == p.input_dim(),
        "view has {} features but the encoder expects {}",
        view.feature_dim(),
        p.input_dim()
    );
    ensure!(p.w1.cols() == p.w2.rows(), "W1 and W2 inner dimensions disagree");
    let prop = view.propagator();
    let ax = view.propagated_features().clone();
    let h1_pre = ax.matmul(&p.w1);
    let h1 = h1_pre.map(relu);
    let ah1 = prop.matmul(&h1);
    let z_pre = ah1.matmul(&p.w2);
    let z = z_pre.map(relu);
    Ok(NodeEmbeddings {
        z,
        view_id,
        cache: GcnCache {
            ax,
            h1_pre,
            ah1,
            z_pre,
            params: p.fingerprint(),
            nodes: view.num_nodes(),
        },
    })
}

pub fn gcn_backward(grad_z: &Matrix, emb: &NodeEmbeddings, view: &GraphView, p: &GcnParams) -> Result<GcnGrads> {
    let c = &emb.cache;
    ensure!(
        c.params == p.fingerprint() && c.nodes == view.num_nodes(),
        "stale encoder cache: parameters or view changed since the forward pass"
    );
    ensure!(
        grad_z.shape() == emb.z.shape(),
        "upstream gradient shape {:?} does not match embeddings {:?}",
        grad_z.shape(),
        emb.z.shape()
    );
    let prop = view.propagator();
    let d_zpre = relu_mask(grad_z, &c.z_pre);
    let w2 = c.ah1.t_matmul(&d_zpre);
    let d_h1 = prop.t_matmul(&d_zpre.matmul_t(&p.w2));
    let d_h1pre = relu_mask(&d_h1, &c.h1_pre);
    let w1 = c.ax.t_matmul(&d_h1pre);
    let x = prop.t_matmul(&d_h1pre.matmul_t(&p.w1));
    Ok(GcnGrads { w1, w2, x })
}

/// Scoring vector `M` (`d_out × 1`) of the attention readout.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    pub m: Matrix,
}

impl AttentionParams {
    pub fn init(d_out: usize, rng: &mut RngState) -> Self {
        Self {
            m: glorot_uniform(d_out, 1, rng),
        }
    }
}

/// Global graph vector and the node attention that produced it.
#[derive(Clone, Debug)]
pub struct GraphRepresentation {
    pub s: Vec<f64>,
    pub alpha: Vec<f64>,
    /// `tanh(Z M)`
    scores: Vec<f64>,
    inputs: u64,
}

/// `alpha = softmax(tanh(Z M))`, `S = Σ alpha_i z_i`.
pub fn attention_pool(z: &Matrix, a: &AttentionParams) -> Result<GraphRepresentation> {
    ensure!(
        a.m.shape() == (z.cols(), 1),
        "attention vector has shape {:?}, expected ({}, 1)",
        a.m.shape(),
        z.cols()
    );
    ensure!(z.rows() >= 1, "cannot pool an empty graph");
    let scores: Vec<f64> = z.matmul(&a.m).as_slice().iter().map(|u| u.tanh()).collect();
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut alpha: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
    let total: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|v| *v /= total);
    let s = Matrix::column_vector(&alpha).t_matmul(z).into_vec();
    debug_assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    Ok(GraphRepresentation {
        s,
        alpha,
        scores,
        inputs: fingerprint(&[z, &a.m]),
    })
}

/// Returns `(dM, dZ)`.
pub fn attention_pool_backward(
    grad_s: &[f64],
    rep: &GraphRepresentation,
    z: &Matrix,
    a: &AttentionParams,
) -> Result<(Matrix, Matrix)> {
    ensure!(
        rep.inputs == fingerprint(&[z, &a.m]),
        "stale attention cache: embeddings or scoring vector changed since the forward pass"
    );
    ensure!(grad_s.len() == z.cols(), "gradient length {} != embedding dim {}", grad_s.len(), z.cols());
    let n = z.rows();
    let g = Matrix::column_vector(grad_s);
    let d_alpha = z.matmul(&g);
    let mean: f64 = (0..n).map(|i| rep.alpha[i] * d_alpha[(i, 0)]).sum();
    let d_u: Vec<f64> = (0..n)
        .map(|i| rep.alpha[i] * (d_alpha[(i, 0)] - mean) * (1.0 - rep.scores[i] * rep.scores[i]))
        .collect();
    let d_u = Matrix::column_vector(&d_u);
    let grad_m = z.t_matmul(&d_u);
    let mut grad_z = d_u.matmul_t(&a.m);
    for i in 0..n {
        for (gz, gs) in grad_z.row_mut(i).iter_mut().zip(grad_s) {
            *gz += rep.alpha[i] * gs;
        }
    }
    Ok((grad_m, grad_z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_view(x: Matrix) -> GraphView {
        let a = Matrix::from_rows(&[[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]);
        GraphView::new(x, a, Family::SpectralSpatial, 0).unwrap()
    }

    #[test]
    fn empty_graph_identity_weights_pass_features_through() {
        let x = Matrix::from_rows(&[[0.5, 1.0], [2.0, 0.0], [0.1, 0.3]]);
        let view = GraphView::new(x.clone(), Matrix::zeros(3, 3), Family::Texture, 0).unwrap();
        let p = GcnParams {
            w1: Matrix::identity(2),
            w2: Matrix::identity(2),
            family: Family::Texture,
        };
        assert_eq!(gcn_forward(&view, &p, 1).unwrap().z, x);
    }

    #[test]
    fn negative_preactivations_clamp_to_zero() {
        let view = path_view(Matrix::from_rows(&[[1.0], [2.0], [3.0]]));
        let p = GcnParams {
            w1: Matrix::from_rows(&[[-1.0]]),
            w2: Matrix::from_rows(&[[1.0]]),
            family: Family::SpectralSpatial,
        };
        assert_eq!(gcn_forward(&view, &p, 1).unwrap().z, Matrix::zeros(3, 1));
    }

    #[test]
    fn path_graph_two_hop_by_hand() {
        // Degrees of I+A: 2, 3, 2.
        // Â = [[1/2, 1/√6, 0], [1/√6, 1/3, 1/√6], [0, 1/√6, 1/2]]
        let view = path_view(Matrix::from_rows(&[[1.0], [0.0], [0.0]]));
        let p = GcnParams {
            w1: Matrix::from_rows(&[[2.0]]),
            w2: Matrix::from_rows(&[[3.0]]),
            family: Family::SpectralSpatial,
        };
        let r6 = 6f64.sqrt();
        let h1 = [2.0 * 0.5, 2.0 / r6, 0.0];
        let want = [
            3.0 * (0.5 * h1[0] + h1[1] / r6),
            3.0 * (h1[0] / r6 + h1[1] / 3.0),
            3.0 * (h1[1] / r6),
        ];
        let z = gcn_forward(&view, &p, 1).unwrap().z;
        for i in 0..3 {
            assert!((z[(i, 0)] - want[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn feature_dim_mismatch_is_contract_error() {
        let view = path_view(Matrix::zeros(3, 2));
        let p = GcnParams::init(3, &EncoderConfig::default(), Family::SpectralSpatial, &mut RngState::new(0));
        assert!(gcn_forward(&view, &p, 1).is_err());
    }

    #[test]
    fn linear_region_gradient_is_closed_form() {
        // All activations positive: Z = Â Â X W1 W2, so
        // dW2 = (Â Â X W1)ᵀ G and dW1 = (Â Â X)ᵀ G W2ᵀ.
        let x = Matrix::from_rows(&[[1.0, 0.5], [0.3, 2.0], [0.7, 0.2]]);
        let view = path_view(x.clone());
        let p = GcnParams {
            w1: Matrix::from_rows(&[[1.0, 0.2], [0.4, 1.0]]),
            w2: Matrix::from_rows(&[[0.5], [1.5]]),
            family: Family::SpectralSpatial,
        };
        let emb = gcn_forward(&view, &p, 1).unwrap();
        let g = Matrix::from_rows(&[[1.0], [-2.0], [0.5]]);
        let grads = gcn_backward(&g, &emb, &view, &p).unwrap();
        let a = view.norm_adjacency();
        let aax = a.matmul(&a).matmul(&x);
        let dw2 = aax.matmul(&p.w1).t_matmul(&g);
        let dw1 = aax.t_matmul(&g.matmul_t(&p.w2));
        assert!(grads.w2.sub(&dw2).max_abs() < 1e-12);
        assert!(grads.w1.sub(&dw1).max_abs() < 1e-12);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let view = path_view(Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0], [3.0, 1.0]]));
        let p = GcnParams::init(2, &EncoderConfig { hidden_dim: 4, output_dim: 3 }, Family::SpectralSpatial, &mut RngState::new(1));
        let emb = gcn_forward(&view, &p, 1).unwrap();
        let g = gcn_backward(&Matrix::zeros(3, 3), &emb, &view, &p).unwrap();
        assert_eq!(g.w1.max_abs() + g.w2.max_abs() + g.x.max_abs(), 0.0);
    }

    #[test]
    fn stale_cache_rejected() {
        let view = path_view(Matrix::from_rows(&[[1.0], [2.0], [3.0]]));
        let mut p = GcnParams::init(1, &EncoderConfig { hidden_dim: 2, output_dim: 2 }, Family::SpectralSpatial, &mut RngState::new(1));
        let emb = gcn_forward(&view, &p, 1).unwrap();
        p.w1[(0, 0)] += 1.0;
        assert!(gcn_backward(&Matrix::zeros(3, 2), &emb, &view, &p).is_err());
    }

    #[test]
    fn identical_rows_pool_uniformly() {
        let z = Matrix::from_rows(&[[0.2, 0.4], [0.2, 0.4], [0.2, 0.4], [0.2, 0.4]]);
        let a = AttentionParams::init(2, &mut RngState::new(3));
        let r = attention_pool(&z, &a).unwrap();
        assert!(r.alpha.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!((r.s[0] - 0.2).abs() < 1e-15 && (r.s[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn single_node_pool() {
        let z = Matrix::from_rows(&[[1.5, -2.0]]);
        let r = attention_pool(&z, &AttentionParams::init(2, &mut RngState::new(0))).unwrap();
        assert_eq!(r.alpha, vec![1.0]);
        assert_eq!(r.s, vec![1.5, -2.0]);
    }

    #[test]
    fn two_nodes_saturated_score() {
        // Scores tanh(0) = 0 and tanh(50) ≈ 1.
        let z = Matrix::from_rows(&[[0.0, 1.0], [50.0, 3.0]]);
        let a = AttentionParams {
            m: Matrix::from_rows(&[[1.0], [0.0]]),
        };
        let r = attention_pool(&z, &a).unwrap();
        let t = 50f64.tanh();
        let a2 = t.exp() / (1.0 + t.exp());
        assert!((r.alpha[1] - a2).abs() < 1e-15);
        assert!((r.s[0] - 50.0 * a2).abs() < 1e-12);
    }

    #[test]
    fn symmetric_point_direct_term() {
        // With M = 0 the scores vanish, dα = 0 through the scores, and each
        // node receives exactly alpha_i = 1/N times the upstream gradient.
        let z = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]);
        let a = AttentionParams { m: Matrix::zeros(2, 1) };
        let r = attention_pool(&z, &a).unwrap();
        let (_, gz) = attention_pool_backward(&[1.0, 2.0], &r, &z, &a).unwrap();
        for i in 0..4 {
            assert!((gz[(i, 0)] - 0.25).abs() < 1e-15);
            assert!((gz[(i, 1)] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_grad_s_gives_zero() {
        let z = Matrix::from_rows(&[[1.0, 0.3], [0.2, 1.0]]);
        let a = AttentionParams::init(2, &mut RngState::new(5));
        let r = attention_pool(&z, &a).unwrap();
        let (gm, gz) = attention_pool_backward(&[0.0, 0.0], &r, &z, &a).unwrap();
        assert_eq!(gm.max_abs() + gz.max_abs(), 0.0);
    }
}
