//! Hyperspectral cubes, label maps, scene crops and synthetic scenes.

mod io;
mod synth;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::numerics::Matrix;

pub use io::{
    header_and_payload_paths, load_cube, load_labels, save_cube, save_labels, CUBE_MAGIC, LABELS_MAGIC,
};
pub use synth::{synth_scene, SynthParams, SYNTH_RETRY_CAP};

/// Hyperspectral cube stored band-interleaved-by-pixel: the value of band `b`
/// at pixel `(r, c)` lives at `(r * width + c) * bands + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    bands: usize,
    values: Vec<f64>,
    wavelength_nm: Option<Vec<f64>>,
}

impl HsiCube {
    pub fn new(height: usize, width: usize, bands: usize, values: Vec<f64>) -> Result<Self> {
        ensure!(
            height > 0 && width > 0 && bands > 0,
            "cube dimensions must be positive, got {height}x{width}x{bands}"
        );
        ensure!(
            values.len() == height * width * bands,
            "cube has {} values, expected {}",
            values.len(),
            height * width * bands
        );
        ensure!(values.iter().all(|v| v.is_finite()), "cube has non-finite values");
        Ok(Self {
            height,
            width,
            bands,
            values,
            wavelength_nm: None,
        })
    }

    pub fn with_wavelengths(mut self, wavelength_nm: Vec<f64>) -> Result<Self> {
        ensure!(
            wavelength_nm.len() == self.bands,
            "{} wavelengths for {} bands",
            wavelength_nm.len(),
            self.bands
        );
        self.wavelength_nm = Some(wavelength_nm);
        Ok(self)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn wavelength_nm(&self) -> Option<&[f64]> {
        self.wavelength_nm.as_deref()
    }

    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.values[(row * self.width + col) * self.bands + band]
    }

    pub fn spectrum(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.bands;
        &self.values[start..start + self.bands]
    }

    /// Pixels as rows, bands as columns.
    pub fn to_pixel_matrix(&self) -> Matrix {
        Matrix::from_vec(self.pixels(), self.bands, self.values.clone()).expect("consistent dims")
    }
}

/// Per-pixel class ids; 0 is unlabeled background, classes are `1..=K`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u16>) -> Result<Self> {
        ensure!(height > 0 && width > 0, "label map dimensions must be positive");
        ensure!(
            labels.len() == height * width,
            "label map has {} entries, expected {}",
            labels.len(),
            height * width
        );
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.labels[row * self.width + col]
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0) as usize
    }

    /// Renumbers the classes present to `1..=K` in increasing id order, as
    /// needed after a crop drops some classes. Returns the map and the
    /// original id of each new class (index 0 is background).
    pub fn compacted(&self) -> (LabelMap, Vec<u16>) {
        let mut present = vec![false; self.num_classes() + 1];
        for &l in &self.labels {
            present[l as usize] = true;
        }
        let original: Vec<u16> = std::iter::once(0)
            .chain((1..present.len()).filter(|&i| present[i]).map(|i| i as u16))
            .collect();
        let mut new_id = vec![0u16; present.len()];
        for (n, &o) in original.iter().enumerate() {
            new_id[o as usize] = n as u16;
        }
        let labels = self.labels.iter().map(|&l| new_id[l as usize]).collect();
        (
            LabelMap {
                height: self.height,
                width: self.width,
                labels,
            },
            original,
        )
    }

    /// Row-major indices of labeled (nonzero) pixels.
    pub fn labeled_pixels(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] != 0).collect()
    }

    /// Checks dimensions against a cube and that the class ids present are
    /// exactly `1..=K`.
    pub fn validate_against(&self, cube: &HsiCube) -> Result<()> {
        ensure!(
            self.height == cube.height() && self.width == cube.width(),
            "label map {}x{} does not match cube {}x{}",
            self.height,
            self.width,
            cube.height(),
            cube.width()
        );
        let k = self.num_classes();
        let mut seen = vec![false; k + 1];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        ensure!(
            seen[1..].iter().all(|&s| s),
            "class ids are not contiguous from 1 to {k}"
        );
        Ok(())
    }
}

/// Half-open pixel window `[rows) × [cols)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneCrop {
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

impl SceneCrop {
    pub fn new(rows: Range<usize>, cols: Range<usize>) -> Self {
        Self { rows, cols }
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self::new(0..height, 0..width)
    }

    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.cols.len()
    }

    /// `inner` is expressed relative to `self`; returns it in absolute terms.
    pub fn compose(&self, inner: &SceneCrop) -> SceneCrop {
        SceneCrop::new(
            self.rows.start + inner.rows.start..self.rows.start + inner.rows.end,
            self.cols.start + inner.cols.start..self.cols.start + inner.cols.end,
        )
    }

    fn check(&self, height: usize, width: usize) -> Result<()> {
        ensure!(
            !self.rows.is_empty() && !self.cols.is_empty(),
            "crop {:?}x{:?} is empty",
            self.rows,
            self.cols
        );
        ensure!(
            self.rows.end <= height && self.cols.end <= width,
            "crop {:?}x{:?} exceeds scene {height}x{width}",
            self.rows,
            self.cols
        );
        Ok(())
    }
}

/// Per-band min-max scaling to `[0, 1]`; constant bands become 0.
pub fn normalize_bands(cube: &HsiCube) -> HsiCube {
    let b = cube.bands;
    let mut lo = vec![f64::INFINITY; b];
    let mut hi = vec![f64::NEG_INFINITY; b];
    for px in cube.values.chunks_exact(b) {
        for (k, &v) in px.iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let mut values = cube.values.clone();
    for px in values.chunks_exact_mut(b) {
        for (k, v) in px.iter_mut().enumerate() {
            let span = hi[k] - lo[k];
            *v = if span > 0.0 { (*v - lo[k]) / span } else { 0.0 };
        }
    }
    HsiCube {
        values,
        ..cube.clone()
    }
}

pub fn crop_cube(cube: &HsiCube, c: &SceneCrop) -> Result<HsiCube> {
    c.check(cube.height, cube.width)?;
    let mut values = Vec::with_capacity(c.height() * c.width() * cube.bands);
    for r in c.rows.clone() {
        for col in c.cols.clone() {
            values.extend_from_slice(cube.spectrum(r, col));
        }
    }
    Ok(HsiCube {
        height: c.height(),
        width: c.width(),
        bands: cube.bands,
        values,
        wavelength_nm: cube.wavelength_nm.clone(),
    })
}

pub fn crop_labels(labels: &LabelMap, c: &SceneCrop) -> Result<LabelMap> {
    c.check(labels.height, labels.width)?;
    let mut out = Vec::with_capacity(c.height() * c.width());
    for r in c.rows.clone() {
        for col in c.cols.clone() {
            out.push(labels.get(r, col));
        }
    }
    LabelMap::new(c.height(), c.width(), out)
}

pub fn crop(cube: &HsiCube, labels: &LabelMap, c: &SceneCrop) -> Result<(HsiCube, LabelMap)> {
    ensure!(
        labels.height == cube.height && labels.width == cube.width,
        "label map and cube dimensions differ"
    );
    Ok((crop_cube(cube, c)?, crop_labels(labels, c)?))
}
