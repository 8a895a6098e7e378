//! Stage wiring shared by the CLI and the FFI layer: scene → views → trained
//! state → clusters and metrics.
//!
//! All randomness derives from `RunConfig::seed` through fixed fork ids, so a
//! stage run twice with the same config produces the same bytes.

use crate::clustering::{affinity_from_c, evaluate, spectral_cluster, MetricsReport};
use crate::config::{DataSource, RunConfig};
use crate::data::{crop_cube, crop_labels, load_cube, load_labels, normalize_bands, synth_scene, HsiCube, LabelMap};
use crate::error::{Error, Result};
use crate::numerics::RngState;
use crate::trainer::{train, TrainState};
use crate::views::{build_views, MultiView};

const SCENE_STREAM: u64 = 1;
const VIEW_STREAM: u64 = 2;
const TRAIN_STREAM: u64 = 3;
const CLUSTER_STREAM: u64 = 4;

#[derive(Clone, Debug)]
pub struct Scene {
    /// Band-normalized cube.
    pub cube: HsiCube,
    /// Ground truth, or every pixel labeled 1 when none was supplied.
    pub labels: LabelMap,
    pub has_truth: bool,
}

/// The raw synthetic scene, before cropping and normalization.
pub fn generate_scene(cfg: &RunConfig) -> Result<(HsiCube, LabelMap)> {
    match &cfg.data {
        DataSource::Synthetic(p) => synth_scene(p, &mut RngState::new(cfg.seed).fork(SCENE_STREAM)),
        DataSource::Files { .. } => Err(Error::Config("generate needs a [data.synthetic] section".into())),
    }
}

pub fn load_scene(cfg: &RunConfig) -> Result<Scene> {
    match &cfg.data {
        DataSource::Synthetic(_) => {
            let (c, l) = generate_scene(cfg)?;
            prepare_scene(cfg, c, Some(l))
        }
        DataSource::Files { cube, labels } => {
            let c = load_cube(cube).map_err(|e| e.context(format!("loading cube {}", cube.display())))?;
            let l = match labels {
                Some(path) => {
                    Some(load_labels(path).map_err(|e| e.context(format!("loading labels {}", path.display())))?)
                }
                None => None,
            };
            prepare_scene(cfg, c, l)
        }
    }
}

/// Applies the configured crop and per-band normalization to an in-memory
/// scene. Without labels every pixel becomes a node. Classes left after the
/// crop are renumbered `1..=K`.
pub fn prepare_scene(cfg: &RunConfig, cube: HsiCube, labels: Option<LabelMap>) -> Result<Scene> {
    let has_truth = labels.is_some();
    let labels = match labels {
        Some(l) => l,
        None => LabelMap::new(cube.height(), cube.width(), vec![1; cube.pixels()])?,
    };
    labels.validate_against(&cube)?;
    let labels_before = labels.num_classes();
    let (cube, labels) = match &cfg.crop {
        Some(c) => {
            let crop = c.to_crop();
            (crop_cube(&cube, &crop)?, crop_labels(&labels, &crop)?)
        }
        None => (cube, labels),
    };
    let (labels, original) = labels.compacted();
    if original.len() - 1 < labels_before {
        log::info!(
            "crop keeps {} of {labels_before} classes (original ids {:?})",
            original.len() - 1,
            &original[1..]
        );
    }
    Ok(Scene {
        cube: normalize_bands(&cube),
        labels,
        has_truth,
    })
}

pub fn build_scene_views(cfg: &RunConfig, scene: &Scene) -> Result<MultiView> {
    build_views(
        &scene.cube,
        &scene.labels,
        &cfg.views,
        &RngState::new(cfg.seed).fork(VIEW_STREAM),
    )
}

pub fn train_views(cfg: &RunConfig, mv: &MultiView) -> Result<TrainState> {
    train(mv, &cfg.train, &RngState::new(cfg.seed).fork(TRAIN_STREAM))
}

#[derive(Clone, Debug)]
pub struct ClusterOutcome {
    /// Cluster of each node, `0..k`.
    pub node_labels: Vec<usize>,
    /// Full-scene map: 0 for background, `cluster + 1` elsewhere.
    pub map: LabelMap,
    pub k: usize,
    pub degenerate: bool,
    pub metrics: Option<MetricsReport>,
}

pub fn cluster_state(cfg: &RunConfig, scene: &Scene, mv: &MultiView, state: &TrainState) -> Result<ClusterOutcome> {
    let n = mv.num_nodes();
    let c = &state.model.sx.c;
    if c.shape() != (n, n) {
        return Err(Error::Compatibility(format!(
            "state holds a {}x{} coefficient matrix but the scene has {n} nodes",
            c.rows(),
            c.cols()
        )));
    }
    let k = match (cfg.clustering.clusters, scene.has_truth) {
        (Some(k), _) => k,
        (None, true) => mv.num_classes(),
        (None, false) => {
            return Err(Error::Config(
                "clustering.clusters must be set when no ground truth is supplied".into(),
            ))
        }
    };
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 clusters, got {k}")));
    }
    let w = affinity_from_c(c, cfg.clustering.affinity_topq)?;
    let result = spectral_cluster(&w, k, &mut RngState::new(cfg.seed).fork(CLUSTER_STREAM))?;

    let mut map = vec![0u16; mv.height * mv.width];
    for (&pixel, &label) in mv.nodes.iter().zip(&result.labels) {
        map[pixel] = label as u16 + 1;
    }
    let metrics = if scene.has_truth {
        let truth: Vec<usize> = mv.truth.iter().map(|&t| t as usize - 1).collect();
        Some(evaluate(&result.labels, &truth, cfg.clustering.nmi_norm)?)
    } else {
        None
    };
    Ok(ClusterOutcome {
        node_labels: result.labels,
        map: LabelMap::new(mv.height, mv.width, map)?,
        k,
        degenerate: result.degenerate,
        metrics,
    })
}
