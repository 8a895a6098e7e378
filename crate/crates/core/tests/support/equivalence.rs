//! Production kernels against the brute-force oracles.

use mlgsc_core::clustering::{evaluate, NmiNorm};
use mlgsc_core::contrastive::{graph_contrast, node_contrast};
use mlgsc_core::data::{normalize_bands, synth_scene, SynthParams};
use mlgsc_core::self_expression::masked_ridge_oracle;
use mlgsc_core::trainer::{sx_adjacency, TrainConfig, Trainer};
use mlgsc_core::views::{build_views, ViewConfig};
use mlgsc_core::RngState;

use super::gradient_suite::random;
use super::oracles::{exhaustive_oa, naive_graph_contrast, naive_node_contrast};

pub const CONTRAST_INSTANCES: u64 = 20;
pub const HUNGARIAN_INSTANCES: u64 = 50;
pub const RIDGE_SEEDS: [u64; 3] = [1, 2, 3];

/// Largest gap between vectorized and double-loop losses (node and graph).
pub fn contrast_gap() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..CONTRAST_INSTANCES {
        let mut rng = RngState::new(700 + seed);
        let n = 1 + rng.below(12);
        let d = 1 + rng.below(6);
        let tau = [0.05, 0.2, 1.0][rng.below(3)];
        let za = random(n, d, &mut rng);
        let zb = random(n, d, &mut rng);
        let fast = node_contrast(&za, &zb, tau).unwrap().value;
        worst = worst.max((fast - naive_node_contrast(&za, &zb, tau)).abs());

        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..1 + rng.below(4))
            .map(|_| ((0..d).map(|_| rng.normal()).collect(), (0..d).map(|_| rng.normal()).collect()))
            .collect();
        let negs: Vec<Vec<f64>> = (0..rng.below(5)).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
        let pos: Vec<(&[f64], &[f64])> = pairs.iter().map(|(a, b)| (&a[..], &b[..])).collect();
        let neg: Vec<&[f64]> = negs.iter().map(|v| &v[..]).collect();
        let fast = graph_contrast(&pos, &neg, tau).unwrap().value;
        worst = worst.max((fast - naive_graph_contrast(&pairs, &negs, tau)).abs());
    }
    worst
}

/// Trains `C` alone (encoders frozen, only the self-expression term on) and
/// returns `‖C − C*‖_F / ‖C*‖_F` against the masked ridge solution on the
/// same fused embeddings, plus the node count.
pub fn trained_c_vs_ridge(seed: u64) -> (f64, usize) {
    let p = SynthParams {
        classes: 3,
        height: 7,
        width: 7,
        bands: 8,
        noise_sigma: 0.02,
    };
    let (cube, labels) = synth_scene(&p, &mut RngState::new(seed)).unwrap();
    let vc = ViewConfig {
        knn_k: 5,
        ..ViewConfig::default()
    };
    let mv = build_views(&normalize_bands(&cube), &labels, &vc, &RngState::new(seed + 100)).unwrap();
    let cfg = TrainConfig {
        epochs: 400,
        freeze_encoders: true,
        enable_cnode: false,
        enable_dnode: false,
        enable_graph: false,
        grad_clip_norm: 0.0,
        c_learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(&mv, &cfg, &RngState::new(seed + 200)).unwrap();
    let x = t.fused_embeddings().unwrap().transpose();
    let z = x.matmul(&sx_adjacency(&mv, cfg.sx_adjacency).unwrap());
    let oracle = masked_ridge_oracle(&z, &x, cfg.lambda).unwrap();
    for _ in 0..cfg.epochs {
        t.step().unwrap();
    }
    let c = &t.state().model.sx.c;
    (c.sub(&oracle).frobenius_norm() / oracle.frobenius_norm(), mv.num_nodes())
}

/// Instances (out of `HUNGARIAN_INSTANCES`) where Hungarian and exhaustive
/// OA differ in any bit.
pub fn hungarian_mismatches() -> usize {
    (0..HUNGARIAN_INSTANCES)
        .filter(|&seed| {
            let mut rng = RngState::new(900 + seed);
            let k = 1 + rng.below(8);
            let n = 5 + rng.below(60);
            let truth: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
            // Mostly a relabeled copy with some noise, so the best match is not trivial.
            let perm = rng.permutation(k);
            let pred: Vec<usize> = truth
                .iter()
                .map(|&t| if rng.uniform() < 0.7 { perm[t] } else { rng.below(k) })
                .collect();
            let fast = evaluate(&pred, &truth, NmiNorm::Arithmetic).unwrap().oa;
            fast.to_bits() != exhaustive_oa(&pred, &truth).unwrap().to_bits()
        })
        .count()
}
