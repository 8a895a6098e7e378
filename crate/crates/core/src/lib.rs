//! Hyperspectral image clustering with multi-level graph contrastive
//! learning and graph self-expression.
//!
//! The pipeline, bottom to top:
//!
//! 1. [`data`]: load or synthesize a hyperspectral cube and label map.
//! 2. [`views`]: build a spectral-spatial view (PCA + sliding patches) and a
//!    texture view (PCA + morphological opening/closing profile), a kNN graph
//!    for each, and two edge-dropped augmentations per graph.
//! 3. [`encoder`]: two-layer GCN per feature family plus attention pooling.
//! 4. [`contrastive`]: node-level intra-view, node-level inter-view and
//!    graph-level InfoNCE losses.
//! 5. [`fusion`] and [`self_expression`]: node-wise softmax fusion of the two
//!    families and a trainable self-expression matrix `C`.
//! 6. [`trainer`]: joint optimization under uncertainty-weighted multi-task
//!    loss with a hand-written Adam.
//! 7. [`clustering`]: affinity from `C`, normalized spectral clustering, and
//!    OA / NMI / Kappa evaluation.
//!
//! Every forward pass has an explicit analytic backward pass; there is no
//! autodiff.

pub mod cli;
pub mod clustering;
pub mod config;
pub mod contrastive;
pub mod data;
pub mod encoder;
pub mod error;
pub mod fusion;
pub mod numerics;
pub mod pipeline;
pub mod render;
pub mod self_expression;
pub mod trainer;
pub mod views;

pub use error::{Error, Result};
pub use numerics::{Matrix, RngState};
