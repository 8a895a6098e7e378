//! Run configuration: one TOML document with a section per stage.
//!
//! ```toml
//! seed = 0
//! out_dir = "out"
//!
//! [data.synthetic]
//! classes = 3
//! height = 30
//! width = 30
//! bands = 20
//! noise_sigma = 0.02
//!
//! [views]
//! knn_k = 10
//!
//! [train]
//! epochs = 200
//!
//! [clustering]
//! nmi_norm = "arithmetic"
//! ```
//!
//! Every field has a default, so an empty document is a valid config.
//! `[data.files]` (with `cube` and optional `labels` paths) replaces
//! `[data.synthetic]`; giving both is an error.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::NmiNorm;
use crate::data::{SceneCrop, SynthParams};
use crate::error::{Error, Result};
use crate::trainer::TrainConfig;
use crate::views::ViewConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SynthParams),
    Files {
        cube: PathBuf,
        /// Without ground truth every pixel is clustered and metrics are skipped.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<PathBuf>,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SynthParams::default())
    }
}

/// Half-open `[start, end)` pixel ranges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CropConfig {
    pub rows: [usize; 2],
    pub cols: [usize; 2],
}

impl CropConfig {
    pub fn to_crop(self) -> SceneCrop {
        SceneCrop::new(self.rows[0]..self.rows[1], self.cols[0]..self.cols[1])
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    /// Number of clusters; unset means the number of ground-truth classes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clusters: Option<usize>,
    /// Keep only the `q` largest coefficients per column of `C`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub affinity_topq: Option<usize>,
    pub nmi_norm: NmiNorm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crop: Option<CropConfig>,
    pub views: ViewConfig,
    pub train: TrainConfig,
    pub clustering: ClusteringConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            data: DataSource::default(),
            crop: None,
            views: ViewConfig::default(),
            train: TrainConfig::default(),
            clustering: ClusteringConfig::default(),
        }
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Contract(m) => Error::Config(m),
        other => other,
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(format!("reading config {}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Paths inside `[data.files]` are taken relative to `dir` unless absolute.
    pub fn resolve_paths(&mut self, dir: &Path) {
        if let DataSource::Files { cube, labels } = &mut self.data {
            if cube.is_relative() {
                *cube = dir.join(&*cube);
            }
            if let Some(l) = labels {
                if l.is_relative() {
                    *l = dir.join(&*l);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let DataSource::Synthetic(p) = &self.data {
            p.validate().map_err(config_err)?;
        }
        if let Some(c) = &self.crop {
            if c.rows[0] >= c.rows[1] || c.cols[0] >= c.cols[1] {
                return Err(Error::Config(format!(
                    "crop rows {:?} cols {:?} must be nonempty [start, end) ranges",
                    c.rows, c.cols
                )));
            }
        }
        if let Some(k) = self.clustering.clusters {
            if k < 2 {
                return Err(Error::Config(format!("clusters must be at least 2, got {k}")));
            }
        }
        if self.clustering.affinity_topq == Some(0) {
            return Err(Error::Config("affinity_topq must be positive".into()));
        }
        self.views.validate().map_err(config_err)?;
        self.train.validate().map_err(config_err)
    }
}
