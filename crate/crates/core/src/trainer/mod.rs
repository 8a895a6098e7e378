//! Joint training of both encoders, both attention readouts, the
//! self-expression matrix, and the uncertainty weights.

mod adam;
mod history;
mod state_io;
mod weights;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrastive::{corrupt_graph_representation, graph_contrast_eps, node_contrast_eps, ContrastiveConfig, InterViewPairing};
use crate::encoder::{
    attention_pool, attention_pool_backward, gcn_backward, gcn_forward, AttentionParams, EncoderConfig, GcnParams,
    NodeEmbeddings,
};
use crate::error::{ensure, Error, Result};
use crate::fusion::{fuse, fuse_backward, FusionGranularity};
use crate::numerics::{Matrix, RngState};
use crate::self_expression::{self_expression_loss, SelfExpressionState, DEFAULT_LAMBDA};
use crate::views::{normalize_adjacency, Family, MultiView};

pub use adam::{adam_step, Moments, BETA1, BETA2, EPSILON};
pub use history::{read_history, smoothed, write_history, EpochRecord};
pub use state_io::{decode_blocks, encode_blocks, read_blocks, write_blocks, STATE_MAGIC};
pub use weights::{total_loss, Component, TotalLoss, UncertaintyWeights};

/// Which feature families take part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewsMode {
    #[default]
    Both,
    SpectralOnly,
    TextureOnly,
}

/// Graph whose normalized adjacency smooths the self-expression dictionary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SxAdjacency {
    #[default]
    Spectral,
    Texture,
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Step size for `C` alone.
    pub c_learning_rate: f64,
    pub enable_cnode: bool,
    pub enable_dnode: bool,
    pub enable_graph: bool,
    pub views: ViewsMode,
    /// Keep encoder and attention weights fixed; only `C` and the loss
    /// weights train.
    pub freeze_encoders: bool,
    /// Global gradient-norm cap; 0 disables clipping.
    pub grad_clip_norm: f64,
    pub resample_augmentation_each_epoch: bool,
    pub lambda: f64,
    /// Off-diagonal starting value of `C`.
    pub c_init: f64,
    pub sx_adjacency: SxAdjacency,
    pub fusion_granularity: FusionGranularity,
    /// Abort when the total loss exceeds this.
    pub divergence_limit: f64,
    pub encoder: EncoderConfig,
    pub contrastive: ContrastiveConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 1.5e-4,
            c_learning_rate: 1e-6,
            enable_cnode: true,
            enable_dnode: true,
            enable_graph: true,
            views: ViewsMode::Both,
            freeze_encoders: false,
            grad_clip_norm: 5.0,
            resample_augmentation_each_epoch: false,
            lambda: DEFAULT_LAMBDA,
            c_init: 0.0,
            sx_adjacency: SxAdjacency::Spectral,
            fusion_granularity: FusionGranularity::Coordinate,
            divergence_limit: 1e6,
            encoder: EncoderConfig::default(),
            contrastive: ContrastiveConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.epochs >= 1, "epochs must be at least 1");
        ensure!(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            "learning_rate must be positive"
        );
        ensure!(
            self.c_learning_rate > 0.0 && self.c_learning_rate.is_finite(),
            "c_learning_rate must be positive"
        );
        ensure!(self.lambda > 0.0 && self.lambda.is_finite(), "lambda must be positive");
        ensure!(self.c_init.is_finite(), "c_init must be finite");
        ensure!(self.grad_clip_norm >= 0.0, "grad_clip_norm must be nonnegative");
        ensure!(self.divergence_limit > 0.0, "divergence_limit must be positive");
        self.encoder.validate()?;
        self.contrastive.validate()
    }

    fn family_active(&self, f: Family) -> bool {
        match (self.views, f) {
            (ViewsMode::Both, _) => true,
            (ViewsMode::SpectralOnly, Family::SpectralSpatial) => true,
            (ViewsMode::TextureOnly, Family::Texture) => true,
            _ => false,
        }
    }

    /// Which of the four components contribute.
    pub fn enabled(&self) -> [bool; 4] {
        let both = self.views == ViewsMode::Both;
        [self.enable_cnode, self.enable_dnode && both, self.enable_graph && both, true]
    }
}

/// Every trainable tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub gcn_spec: GcnParams,
    pub gcn_tex: GcnParams,
    pub att_spec: AttentionParams,
    pub att_tex: AttentionParams,
    pub sx: SelfExpressionState,
    pub weights: UncertaintyWeights,
}

/// Parameter tensor names in optimizer order.
pub const TENSOR_NAMES: [&str; 8] = [
    "gcn_spec.w1",
    "gcn_spec.w2",
    "gcn_tex.w1",
    "gcn_tex.w2",
    "att_spec.m",
    "att_tex.m",
    "c",
    "alpha",
];

const ENCODER_TENSORS: usize = 6;
const C_TENSOR: usize = 6;
const ALPHA_TENSOR: usize = 7;

impl Model {
    pub fn init(mv: &MultiView, cfg: &TrainConfig, rng: &RngState) -> Result<Self> {
        let mut r = rng.fork(10);
        let d_spec = mv.views[0].feature_dim();
        let d_tex = mv.views[2].feature_dim();
        Ok(Self {
            gcn_spec: GcnParams::init(d_spec, &cfg.encoder, Family::SpectralSpatial, &mut r),
            gcn_tex: GcnParams::init(d_tex, &cfg.encoder, Family::Texture, &mut r),
            att_spec: AttentionParams::init(cfg.encoder.output_dim, &mut r),
            att_tex: AttentionParams::init(cfg.encoder.output_dim, &mut r),
            sx: SelfExpressionState::new(mv.num_nodes(), cfg.lambda, cfg.c_init)?,
            weights: UncertaintyWeights::default(),
        })
    }

    fn gcn(&self, f: Family) -> &GcnParams {
        match f {
            Family::SpectralSpatial => &self.gcn_spec,
            Family::Texture => &self.gcn_tex,
        }
    }

    fn att(&self, f: Family) -> &AttentionParams {
        match f {
            Family::SpectralSpatial => &self.att_spec,
            Family::Texture => &self.att_tex,
        }
    }

    pub fn tensors(&self) -> [Matrix; 8] {
        [
            self.gcn_spec.w1.clone(),
            self.gcn_spec.w2.clone(),
            self.gcn_tex.w1.clone(),
            self.gcn_tex.w2.clone(),
            self.att_spec.m.clone(),
            self.att_tex.m.clone(),
            self.sx.c.clone(),
            Matrix::column_vector(&self.weights.alpha),
        ]
    }

    fn tensor_mut(&mut self, i: usize) -> &mut Matrix {
        match i {
            0 => &mut self.gcn_spec.w1,
            1 => &mut self.gcn_spec.w2,
            2 => &mut self.gcn_tex.w1,
            3 => &mut self.gcn_tex.w2,
            4 => &mut self.att_spec.m,
            5 => &mut self.att_tex.m,
            6 => &mut self.sx.c,
            _ => unreachable!("alpha is stored as an array"),
        }
    }
}

/// Model, optimizer moments, and history.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub model: Model,
    pub moments: Vec<Moments>,
    /// Optimizer steps taken.
    pub epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl TrainState {
    pub fn new(model: Model) -> Self {
        let moments = model.tensors().iter().map(Moments::zeros_like).collect();
        Self {
            model,
            moments,
            epoch: 0,
            history: Vec::new(),
        }
    }

    pub fn to_blocks(&self) -> Vec<(String, Matrix)> {
        let mut out: Vec<(String, Matrix)> = TENSOR_NAMES
            .iter()
            .zip(self.model.tensors())
            .map(|(n, m)| (n.to_string(), m))
            .collect();
        out.push(("lambda".into(), Matrix::filled(1, 1, self.model.sx.lambda)));
        out.push(("epoch".into(), Matrix::filled(1, 1, self.epoch as f64)));
        for (n, mo) in TENSOR_NAMES.iter().zip(&self.moments) {
            out.push((format!("adam_m.{n}"), mo.m.clone()));
            out.push((format!("adam_v.{n}"), mo.v.clone()));
        }
        out
    }

    /// Rebuilds a state from its blocks. The loss history travels separately.
    pub fn from_blocks(blocks: Vec<(String, Matrix)>) -> Result<Self> {
        let mut map: std::collections::HashMap<String, Matrix> = blocks.into_iter().collect();
        let mut take = |name: &str| {
            map.remove(name)
                .ok_or_else(|| Error::Compatibility(format!("state file has no `{name}` block")))
        };
        let t: Vec<Matrix> = TENSOR_NAMES.iter().map(|n| take(n)).collect::<Result<_>>()?;
        let scalar = |m: Matrix, name: &str| -> Result<f64> {
            if m.shape() != (1, 1) {
                return Err(Error::Compatibility(format!("`{name}` block must be 1x1")));
            }
            Ok(m[(0, 0)])
        };
        let lambda = scalar(take("lambda")?, "lambda")?;
        let epoch = scalar(take("epoch")?, "epoch")? as usize;
        let mut moments = Vec::with_capacity(8);
        for (n, p) in TENSOR_NAMES.iter().zip(&t) {
            let m = take(&format!("adam_m.{n}"))?;
            let v = take(&format!("adam_v.{n}"))?;
            if m.shape() != p.shape() || v.shape() != p.shape() {
                return Err(Error::Compatibility(format!("optimizer moments for `{n}` do not match its shape")));
            }
            moments.push(Moments { m, v });
        }
        if t[7].shape() != (4, 1) {
            return Err(Error::Compatibility("`alpha` block must be 4x1".into()));
        }
        let shapes_ok = t[0].cols() == t[1].rows()
            && t[2].cols() == t[3].rows()
            && t[1].cols() == t[3].cols()
            && t[4].shape() == (t[1].cols(), 1)
            && t[5].shape() == (t[3].cols(), 1)
            && t[6].is_square();
        if !shapes_ok {
            return Err(Error::Compatibility("parameter blocks have inconsistent shapes".into()));
        }
        let mut it = t.into_iter();
        let mut next = || it.next().expect("eight tensors");
        let model = Model {
            gcn_spec: GcnParams {
                w1: next(),
                w2: next(),
                family: Family::SpectralSpatial,
            },
            gcn_tex: GcnParams {
                w1: next(),
                w2: next(),
                family: Family::Texture,
            },
            att_spec: AttentionParams { m: next() },
            att_tex: AttentionParams { m: next() },
            sx: SelfExpressionState { c: next(), lambda },
            weights: {
                let a = next();
                UncertaintyWeights {
                    alpha: [a[(0, 0)], a[(1, 0)], a[(2, 0)], a[(3, 0)]],
                }
            },
        };
        model.sx.check_diagonal()?;
        Ok(Self {
            model,
            moments,
            epoch,
            history: Vec::new(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_blocks(path, &self.to_blocks())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_blocks(read_blocks(path)?).map_err(|e| e.context(format!("loading {}", path.display())))
    }
}

/// Normalized adjacency that smooths the self-expression dictionary.
pub fn sx_adjacency(mv: &MultiView, which: SxAdjacency) -> Result<Matrix> {
    Ok(match which {
        SxAdjacency::Spectral => normalize_adjacency(&mv.spectral_base)?,
        SxAdjacency::Texture => normalize_adjacency(&mv.texture_base)?,
        SxAdjacency::Mean => normalize_adjacency(&mv.spectral_base)?
            .add(&normalize_adjacency(&mv.texture_base)?)
            .scale(0.5),
    })
}

/// What one optimizer step saw.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub record: EpochRecord,
    /// Gradient norm of every tensor (before clipping), in `TENSOR_NAMES` order.
    pub grad_norms: [f64; 8],
}

pub struct Trainer {
    mv: MultiView,
    cfg: TrainConfig,
    a_bar: Matrix,
    rng: RngState,
    state: TrainState,
}

/// Positive graph-level pairs: each spectral view against each texture view.
const GRAPH_PAIRS: [(usize, usize); 4] = [(0, 2), (0, 3), (1, 2), (1, 3)];

/// Indices of the attention vector and first GCN weight of a family.
fn m_idx_w_idx(f: Family) -> (usize, usize) {
    match f {
        Family::SpectralSpatial => (4, 0),
        Family::Texture => (5, 2),
    }
}

fn family_of(view: usize) -> Family {
    if view < 2 {
        Family::SpectralSpatial
    } else {
        Family::Texture
    }
}

impl Trainer {
    pub fn new(mv: &MultiView, cfg: &TrainConfig, rng: &RngState) -> Result<Self> {
        cfg.validate()?;
        ensure!(mv.views.len() == 4, "expected four views, got {}", mv.views.len());
        let state = TrainState::new(Model::init(mv, cfg, rng)?);
        Self::resume(mv, cfg, rng, state)
    }

    /// Continues from an existing state.
    pub fn resume(mv: &MultiView, cfg: &TrainConfig, rng: &RngState, state: TrainState) -> Result<Self> {
        cfg.validate()?;
        let n = mv.num_nodes();
        if state.model.sx.c.rows() != n {
            return Err(Error::Compatibility(format!(
                "state was trained on {} nodes, data has {n}",
                state.model.sx.c.rows()
            )));
        }
        if state.model.gcn_spec.input_dim() != mv.views[0].feature_dim()
            || state.model.gcn_tex.input_dim() != mv.views[2].feature_dim()
        {
            return Err(Error::Compatibility("encoder input sizes do not match the view features".into()));
        }
        Ok(Self {
            a_bar: sx_adjacency(mv, cfg.sx_adjacency)?,
            mv: mv.clone(),
            cfg: cfg.clone(),
            rng: rng.clone(),
            state,
        })
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    /// Fused node embeddings `F_s` under the current parameters.
    pub fn fused_embeddings(&self) -> Result<Matrix> {
        let z = self.forward_all()?;
        Ok(self.fused(&z)?.0)
    }

    fn forward_all(&self) -> Result<Vec<Option<NodeEmbeddings>>> {
        let model = &self.state.model;
        (0..4)
            .into_par_iter()
            .map(|k| {
                let f = family_of(k);
                if self.cfg.family_active(f) {
                    gcn_forward(&self.mv.views[k], model.gcn(f), k as u8 + 1).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect()
    }

    /// Per-family mean embeddings (absent when the family is off).
    fn family_means(z: &[Option<NodeEmbeddings>]) -> [Option<Matrix>; 2] {
        let mean = |a: usize, b: usize| match (&z[a], &z[b]) {
            (Some(x), Some(y)) => Some(x.z.add(&y.z).scale(0.5)),
            _ => None,
        };
        [mean(0, 1), mean(2, 3)]
    }

    fn fused(&self, z: &[Option<NodeEmbeddings>]) -> Result<(Matrix, Option<crate::fusion::FusionOutput>, [Option<Matrix>; 2])> {
        let means = Self::family_means(z);
        match &means {
            [Some(s), Some(t)] => {
                let out = fuse(s, t, self.cfg.fusion_granularity)?;
                Ok((out.fused.clone(), Some(out), means))
            }
            [Some(s), None] => Ok((s.clone(), None, means)),
            [None, Some(t)] => Ok((t.clone(), None, means)),
            [None, None] => unreachable!("at least one family is active"),
        }
    }

    /// One full-graph optimizer step.
    pub fn step(&mut self) -> Result<StepReport> {
        let epoch = self.state.epoch;
        if self.cfg.resample_augmentation_each_epoch && epoch > 0 {
            let mut r = self.rng.fork(12).fork(epoch as u64);
            let delta = self.mv.drop_prob_delta;
            self.mv.resample_augmentations(delta, &mut r)?;
        }
        let cfg = &self.cfg;
        let model = &self.state.model;
        let tau = cfg.contrastive.tau;
        let eps = cfg.contrastive.norm_eps;
        let enabled = cfg.enabled();
        let scale: [f64; 4] = std::array::from_fn(|i| if enabled[i] { model.weights.scale(i) } else { 0.0 });

        let z = self.forward_all()?;
        let n = self.mv.num_nodes();
        let d = cfg.encoder.output_dim;
        let mut dz: Vec<Matrix> = (0..4).map(|_| Matrix::zeros(n, d)).collect();
        let mut values: [Option<f64>; 4] = [None; 4];
        let zk = |k: usize| &z[k].as_ref().expect("active view").z;
        let mut grads: Vec<Matrix> = model.tensors().iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect();

        if enabled[0] {
            let pairs: Vec<(usize, usize)> = [(0, 1), (2, 3)]
                .into_iter()
                .filter(|&(a, _)| cfg.family_active(family_of(a)))
                .collect();
            let w = 1.0 / pairs.len() as f64;
            let mut v = 0.0;
            for (a, b) in pairs {
                let l = node_contrast_eps(zk(a), zk(b), tau, eps)?;
                v += w * l.value;
                dz[a].add_scaled(&l.grad_a, w * scale[0]);
                dz[b].add_scaled(&l.grad_b, w * scale[0]);
            }
            values[0] = Some(v);
        }

        let (f_s, fusion, means) = self.fused(&z)?;

        if enabled[1] {
            match cfg.contrastive.inter_view_pairing {
                InterViewPairing::Mean => {
                    let (ms, mt) = (means[0].as_ref().unwrap(), means[1].as_ref().unwrap());
                    let l = node_contrast_eps(ms, mt, tau, eps)?;
                    values[1] = Some(l.value);
                    for k in [0, 1] {
                        dz[k].add_scaled(&l.grad_a, 0.5 * scale[1]);
                    }
                    for k in [2, 3] {
                        dz[k].add_scaled(&l.grad_b, 0.5 * scale[1]);
                    }
                }
                InterViewPairing::AllPairs => {
                    let mut v = 0.0;
                    for (a, b) in GRAPH_PAIRS {
                        let l = node_contrast_eps(zk(a), zk(b), tau, eps)?;
                        v += 0.25 * l.value;
                        dz[a].add_scaled(&l.grad_a, 0.25 * scale[1]);
                        dz[b].add_scaled(&l.grad_b, 0.25 * scale[1]);
                    }
                    values[1] = Some(v);
                }
            }
        }

        if enabled[2] {
            let reps = (0..4)
                .map(|k| attention_pool(zk(k), model.att(family_of(k))))
                .collect::<Result<Vec<_>>>()?;
            let corr_rng = self.rng.fork(11).fork(epoch as u64);
            let corrupted = (0..4)
                .into_par_iter()
                .map(|k| {
                    let f = family_of(k);
                    corrupt_graph_representation(&self.mv.views[k], model.gcn(f), model.att(f), &mut corr_rng.fork(k as u64))
                })
                .collect::<Result<Vec<_>>>()?;
            let pos: Vec<(&[f64], &[f64])> = GRAPH_PAIRS.iter().map(|&(a, b)| (&reps[a].s[..], &reps[b].s[..])).collect();
            let neg: Vec<&[f64]> = corrupted.iter().map(|c| &c.representation.s[..]).collect();
            let l = graph_contrast_eps(&pos, &neg, tau, cfg.contrastive.norm_eps)?;
            values[2] = Some(l.value);
            let mut g_s = vec![vec![0.0; d]; 4];
            for (p, &(a, b)) in GRAPH_PAIRS.iter().enumerate() {
                for c in 0..d {
                    g_s[a][c] += scale[2] * l.grad_pos[p].0[c];
                    g_s[b][c] += scale[2] * l.grad_pos[p].1[c];
                }
            }
            for k in 0..4 {
                let f = family_of(k);
                let (mi, wi): (usize, usize) = m_idx_w_idx(f);
                let (gm, gz) = attention_pool_backward(&g_s[k], &reps[k], zk(k), model.att(f))?;
                grads[mi].add_scaled(&gm, 1.0);
                dz[k].add_scaled(&gz, 1.0);
                let c = &corrupted[k];
                let g_neg: Vec<f64> = l.grad_neg[k].iter().map(|v| v * scale[2]).collect();
                let (gm, gz) = attention_pool_backward(&g_neg, &c.representation, &c.embeddings.z, model.att(f))?;
                grads[mi].add_scaled(&gm, 1.0);
                let gg = gcn_backward(&gz, &c.embeddings, &c.view, model.gcn(f))?;
                grads[wi].add_scaled(&gg.w1, 1.0);
                grads[wi + 1].add_scaled(&gg.w2, 1.0);
            }
        }

        let se = self_expression_loss(&f_s, &self.a_bar, &model.sx)?;
        values[3] = Some(se.value);
        grads[C_TENSOR].add_scaled(&se.grad_c, scale[3]);
        let g_f = se.grad_f.scale(scale[3]);
        let (g_spec, g_tex) = match (&fusion, &means) {
            (Some(out), [Some(ms), Some(mt)]) => {
                let (a, b) = fuse_backward(&g_f, ms, mt, out)?;
                (Some(a), Some(b))
            }
            (None, [Some(_), None]) => (Some(g_f), None),
            (None, [None, Some(_)]) => (None, Some(g_f)),
            _ => unreachable!("fusion output matches the active families"),
        };
        for (g, views) in [(g_spec, [0, 1]), (g_tex, [2, 3])] {
            if let Some(g) = g {
                for k in views {
                    dz[k].add_scaled(&g, 0.5);
                }
            }
        }

        let total = total_loss(&values, &model.weights)?;
        if !total.value.is_finite() || total.value > cfg.divergence_limit {
            let parts: Vec<String> = Component::ALL
                .iter()
                .zip(&values)
                .filter_map(|(c, v)| v.map(|v| format!("{}={v:e}", c.name())))
                .collect();
            return Err(Error::Numeric(format!(
                "training diverged at epoch {epoch}: total loss {:e} (limit {:e}); components {}",
                total.value,
                cfg.divergence_limit,
                parts.join(", ")
            )));
        }
        grads[ALPHA_TENSOR] = Matrix::column_vector(&total.grad_alpha);

        if !cfg.freeze_encoders {
            for k in 0..4 {
                let f = family_of(k);
                if let Some(e) = &z[k] {
                    let (_, wi) = m_idx_w_idx(f);
                    let g = gcn_backward(&dz[k], e, &self.mv.views[k], model.gcn(f))?;
                    grads[wi].add_scaled(&g.w1, 1.0);
                    grads[wi + 1].add_scaled(&g.w2, 1.0);
                }
            }
        }
        if cfg.freeze_encoders {
            for g in grads.iter_mut().take(ENCODER_TENSORS) {
                *g = Matrix::zeros(g.rows(), g.cols());
            }
        }

        let grad_norms: [f64; 8] = std::array::from_fn(|i| grads[i].frobenius_norm());
        let global = grad_norms.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !global.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient at epoch {epoch}")));
        }
        if cfg.grad_clip_norm > 0.0 && global > cfg.grad_clip_norm {
            let s = cfg.grad_clip_norm / global;
            grads.iter_mut().for_each(|g| g.scale_in_place(s));
        }

        let record = EpochRecord {
            epoch,
            cnode: values[0],
            dnode: values[1],
            graph: values[2],
            se: values[3],
            w_cnode: model.weights.reported()[0],
            w_dnode: model.weights.reported()[1],
            w_graph: model.weights.reported()[2],
            w_se: model.weights.reported()[3],
            total: total.value,
        };

        let lr = cfg.learning_rate;
        let t = epoch as u64 + 1;
        let state = &mut self.state;
        for i in 0..ALPHA_TENSOR {
            if i < ENCODER_TENSORS && cfg.freeze_encoders {
                continue;
            }
            let lr = if i == C_TENSOR { cfg.c_learning_rate } else { lr };
            adam_step(state.model.tensor_mut(i), &grads[i], &mut state.moments[i], lr, t);
        }
        let mut alpha = Matrix::column_vector(&state.model.weights.alpha);
        adam_step(&mut alpha, &grads[ALPHA_TENSOR], &mut state.moments[ALPHA_TENSOR], lr, t);
        state.model.weights.alpha.copy_from_slice(alpha.as_slice());
        state.model.sx.c.zero_diag();
        state.model.sx.check_diagonal()?;
        state.epoch += 1;
        state.history.push(record.clone());
        Ok(StepReport { record, grad_norms })
    }

}

/// Runs `cfg.epochs` steps from a fresh model.
pub fn train(mv: &MultiView, cfg: &TrainConfig, rng: &RngState) -> Result<TrainState> {
    let mut t = Trainer::new(mv, cfg, rng)?;
    for _ in 0..cfg.epochs {
        t.step()?;
        let r = t.state.history.last().expect("just pushed");
        if r.epoch % 20 == 0 || r.epoch + 1 == cfg.epochs {
            log::info!("epoch {} total loss {:.6}", r.epoch, r.total);
        } else {
            log::debug!("epoch {} total loss {:.6}", r.epoch, r.total);
        }
    }
    Ok(t.into_state())
}
