//! Texture and spectral-spatial feature views, their kNN graphs, and the
//! edge-dropped augmentations fed to the encoders.

mod graph;
pub mod morphology;

use serde::{Deserialize, Serialize};

use crate::data::{HsiCube, LabelMap};
use crate::error::{ensure, Result};
use crate::numerics::{pca_fit_transform, CsrMatrix, Matrix, RngState};

pub use graph::{augment_drop_edges, knn_adjacency, normalize_adjacency};
use morphology::{closing, opening, Image};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViewConfig {
    pub pca_components_spectral: usize,
    pub pca_components_texture: usize,
    /// Odd patch side for the spectral-spatial view.
    pub window_w: usize,
    pub knn_k: usize,
    /// Structuring-element radii, strictly increasing.
    pub se_radii: Vec<usize>,
    pub drop_prob_delta: f64,
}

impl Default for ViewConfig {
    fn default() -> Self {
        Self {
            pca_components_spectral: 4,
            pca_components_texture: 3,
            window_w: 5,
            knn_k: 10,
            se_radii: vec![1, 2, 3],
            drop_prob_delta: 0.1,
        }
    }
}

impl ViewConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.window_w % 2 == 1, "window_w must be odd, got {}", self.window_w);
        ensure!(self.knn_k >= 1, "knn_k must be at least 1");
        ensure!(
            self.pca_components_spectral >= 1 && self.pca_components_texture >= 1,
            "PCA component counts must be at least 1"
        );
        ensure!(!self.se_radii.is_empty(), "se_radii must not be empty");
        ensure!(
            self.se_radii.windows(2).all(|w| w[0] < w[1]),
            "se_radii must be strictly increasing"
        );
        ensure!(
            (0.0..1.0).contains(&self.drop_prob_delta),
            "drop_prob_delta must be in [0, 1)"
        );
        Ok(())
    }

    pub fn texture_dim(&self) -> usize {
        self.pca_components_texture * self.se_radii.len() * 2
    }

    pub fn spectral_dim(&self) -> usize {
        self.window_w * self.window_w * self.pca_components_spectral
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SpectralSpatial,
    Texture,
}

/// One augmented graph view over the shared node set.
#[derive(Clone, Debug)]
pub struct GraphView {
    pub features: Matrix,
    /// Binary, symmetric, zero diagonal.
    pub adjacency: Matrix,
    pub family: Family,
    pub augmentation_id: u8,
    norm_adjacency: CsrMatrix,
    /// `Â · X`, fixed for the life of the view.
    propagated_features: Matrix,
}

impl GraphView {
    pub fn new(features: Matrix, adjacency: Matrix, family: Family, augmentation_id: u8) -> Result<Self> {
        ensure!(
            features.rows() == adjacency.rows(),
            "view has {} feature rows but {} graph nodes",
            features.rows(),
            adjacency.rows()
        );
        let norm = CsrMatrix::from_dense(&normalize_adjacency(&adjacency)?);
        let propagated_features = norm.matmul(&features);
        Ok(Self {
            features,
            adjacency,
            family,
            augmentation_id,
            norm_adjacency: norm,
            propagated_features,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Sparse `D̃^{-1/2}(I+A)D̃^{-1/2}`.
    pub fn propagator(&self) -> &CsrMatrix {
        &self.norm_adjacency
    }

    pub fn norm_adjacency(&self) -> Matrix {
        self.norm_adjacency.to_dense()
    }

    pub fn propagated_features(&self) -> &Matrix {
        &self.propagated_features
    }

    /// Same graph, different node features (used for corrupted negatives).
    pub fn with_features(&self, features: Matrix) -> GraphView {
        assert_eq!(features.shape(), self.features.shape());
        let propagated_features = self.norm_adjacency.matmul(&features);
        GraphView {
            features,
            propagated_features,
            ..self.clone()
        }
    }
}

/// The four augmented views plus the shared bookkeeping the trainer and the
/// clustering stage need.
#[derive(Clone, Debug)]
pub struct MultiView {
    /// Spectral-spatial augmentations 1 and 2, then texture augmentations 1 and 2.
    pub views: Vec<GraphView>,
    /// Non-augmented kNN graphs.
    pub spectral_base: Matrix,
    pub texture_base: Matrix,
    /// Row-major pixel index of each node.
    pub nodes: Vec<usize>,
    /// Ground-truth class (1-based) of each node.
    pub truth: Vec<u16>,
    pub height: usize,
    pub width: usize,
    pub drop_prob_delta: f64,
}

impl MultiView {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_classes(&self) -> usize {
        self.truth.iter().copied().max().unwrap_or(0) as usize
    }

    /// Redraws the edge-drop augmentations from the base graphs.
    pub fn resample_augmentations(&mut self, delta: f64, rng: &mut RngState) -> Result<()> {
        for (i, view) in self.views.iter_mut().enumerate() {
            let base = match view.family {
                Family::SpectralSpatial => &self.spectral_base,
                Family::Texture => &self.texture_base,
            };
            let adj = augment_drop_edges(base, delta, &mut rng.fork(i as u64 + 1))?;
            *view = GraphView::new(view.features.clone(), adj, view.family, view.augmentation_id)?;
        }
        Ok(())
    }
}

/// PCA images of the cube, one `height × width` raster per component.
fn pca_images(cube: &HsiCube, n: usize) -> Result<Vec<Image>> {
    ensure!(n <= cube.bands(), "cannot keep {n} PCA components of a {}-band cube", cube.bands());
    let pca = pca_fit_transform(&cube.to_pixel_matrix(), n)?;
    Ok((0..n)
        .map(|c| Image::new(cube.height(), cube.width(), pca.scores.column(c)))
        .collect())
}

/// Morphological profile: opening and closing of each texture PC image at
/// each radius, one row per pixel, each column scaled to unit max magnitude.
pub fn build_texture_view(cube: &HsiCube, cfg: &ViewConfig) -> Result<Matrix> {
    ensure!(cfg.pca_components_texture >= 1, "pca_components_texture must be at least 1");
    let half = cube.height().min(cube.width()) / 2;
    for &r in &cfg.se_radii {
        ensure!(
            r <= half,
            "structuring-element radius {r} exceeds the image half-extent {half}"
        );
    }
    let images = pca_images(cube, cfg.pca_components_texture)?;
    let dim = cfg.texture_dim();
    let mut feats = Matrix::zeros(cube.pixels(), dim);
    let mut col = 0;
    for img in &images {
        for &r in &cfg.se_radii {
            for resp in [opening(img, r), closing(img, r)] {
                for (p, v) in resp.data.iter().enumerate() {
                    feats[(p, col)] = *v;
                }
                col += 1;
            }
        }
    }
    for c in 0..dim {
        let m = (0..feats.rows()).fold(0.0f64, |m, i| m.max(feats[(i, c)].abs()));
        if m > 0.0 {
            for i in 0..feats.rows() {
                feats[(i, c)] /= m;
            }
        }
    }
    Ok(feats)
}

/// Reflect padding without repeating the edge sample (`-1 -> 1`).
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Flattened `w × w` PCA patch around every pixel, ordered by patch row,
/// patch column, then component.
pub fn build_spectral_spatial_view(cube: &HsiCube, cfg: &ViewConfig) -> Result<Matrix> {
    ensure!(cfg.window_w % 2 == 1, "window_w must be odd, got {}", cfg.window_w);
    let images = pca_images(cube, cfg.pca_components_spectral)?;
    let (h, w) = (cube.height(), cube.width());
    let half = (cfg.window_w / 2) as isize;
    let mut feats = Matrix::zeros(h * w, cfg.spectral_dim());
    for r in 0..h {
        for c in 0..w {
            let row = feats.row_mut(r * w + c);
            let mut k = 0;
            for dr in -half..=half {
                let rr = reflect_index(r as isize + dr, h);
                for dc in -half..=half {
                    let cc = reflect_index(c as isize + dc, w);
                    for img in &images {
                        row[k] = img.get(rr, cc);
                        k += 1;
                    }
                }
            }
        }
    }
    Ok(feats)
}

/// Stream ids for the four augmentations, forked from the caller's stream.
const AUG_STREAMS: [u64; 4] = [1, 2, 3, 4];

/// Builds both feature families over the labeled pixels, their kNN graphs,
/// and two independent edge-drop augmentations of each.
pub fn build_views(cube: &HsiCube, labels: &LabelMap, cfg: &ViewConfig, rng: &RngState) -> Result<MultiView> {
    cfg.validate()?;
    labels.validate_against(cube)?;
    let nodes = labels.labeled_pixels();
    ensure!(nodes.len() >= 2, "need at least two labeled pixels, found {}", nodes.len());
    let truth: Vec<u16> = nodes.iter().map(|&p| labels.labels()[p]).collect();

    let spectral = build_spectral_spatial_view(cube, cfg)?.select_rows(&nodes);
    let texture = build_texture_view(cube, cfg)?.select_rows(&nodes);
    let spectral_base = knn_adjacency(&spectral, cfg.knn_k)?;
    let texture_base = knn_adjacency(&texture, cfg.knn_k)?;

    let mut views = Vec::with_capacity(4);
    for (i, (feats, base, family)) in [
        (&spectral, &spectral_base, Family::SpectralSpatial),
        (&spectral, &spectral_base, Family::SpectralSpatial),
        (&texture, &texture_base, Family::Texture),
        (&texture, &texture_base, Family::Texture),
    ]
    .into_iter()
    .enumerate()
    {
        let adj = augment_drop_edges(base, cfg.drop_prob_delta, &mut rng.fork(AUG_STREAMS[i]))?;
        views.push(GraphView::new(feats.clone(), adj, family, (i % 2) as u8)?);
    }
    Ok(MultiView {
        views,
        spectral_base,
        texture_base,
        nodes,
        truth,
        height: cube.height(),
        width: cube.width(),
        drop_prob_delta: cfg.drop_prob_delta,
    })
}
