use serde::{Deserialize, Serialize};

use super::{HsiCube, LabelMap};
use crate::error::{ensure, Error, Result};
use crate::numerics::RngState;

/// Attempts before giving up on a layout where every class is large enough.
pub const SYNTH_RETRY_CAP: usize = 100;

/// Minimum share of pixels every class must occupy.
const MIN_CLASS_FRACTION: f64 = 0.01;

/// Minimum RMS distance between any two class signatures.
const MIN_SIGNATURE_GAP: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub noise_sigma: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            classes: 3,
            height: 30,
            width: 30,
            bands: 20,
            noise_sigma: 0.02,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.classes >= 2, "synthetic scene needs at least 2 classes, got {}", self.classes);
        ensure!(
            self.classes <= u16::MAX as usize,
            "too many classes for a u16 label map"
        );
        ensure!(
            self.height > 0 && self.width > 0 && self.bands > 0,
            "synthetic scene dimensions must be positive"
        );
        ensure!(
            self.noise_sigma >= 0.0 && self.noise_sigma.is_finite(),
            "noise_sigma must be finite and nonnegative"
        );
        Ok(())
    }
}

/// Labeled synthetic scene: one Voronoi cell per class over random seed
/// points, a smooth random spectral signature per class, and i.i.d. Gaussian
/// noise on every value. Every pixel is labeled.
pub fn synth_scene(p: &SynthParams, rng: &mut RngState) -> Result<(HsiCube, LabelMap)> {
    p.validate()?;
    let (h, w, k) = (p.height, p.width, p.classes);
    let min_count = ((h * w) as f64 * MIN_CLASS_FRACTION).ceil().max(1.0) as usize;

    let mut layout = None;
    for _ in 0..SYNTH_RETRY_CAP {
        let seeds: Vec<(f64, f64)> = (0..k)
            .map(|_| (rng.uniform() * h as f64, rng.uniform() * w as f64))
            .collect();
        let labels: Vec<u16> = (0..h * w)
            .map(|i| {
                let (r, c) = ((i / w) as f64 + 0.5, (i % w) as f64 + 0.5);
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (j, &(sr, sc)) in seeds.iter().enumerate() {
                    let d = (r - sr).powi(2) + (c - sc).powi(2);
                    if d < best_d {
                        best_d = d;
                        best = j;
                    }
                }
                best as u16 + 1
            })
            .collect();
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l as usize - 1] += 1;
        }
        if counts.iter().all(|&c| c >= min_count) {
            layout = Some(labels);
            break;
        }
    }
    let labels = layout.ok_or_else(|| {
        Error::Degenerate(format!(
            "could not place {k} classes of at least {min_count} pixels each in a {h}x{w} scene after {SYNTH_RETRY_CAP} attempts"
        ))
    })?;

    let signatures = class_signatures(k, p.bands, rng)?;
    let mut values = Vec::with_capacity(h * w * p.bands);
    for &l in &labels {
        for &s in &signatures[l as usize - 1] {
            let noise = if p.noise_sigma > 0.0 {
                p.noise_sigma * rng.normal()
            } else {
                0.0
            };
            values.push(s + noise);
        }
    }
    let wavelengths = (0..p.bands)
        .map(|b| {
            if p.bands == 1 {
                400.0
            } else {
                400.0 + 2100.0 * b as f64 / (p.bands - 1) as f64
            }
        })
        .collect();
    let cube = HsiCube::new(h, w, p.bands, values)?.with_wavelengths(wavelengths)?;
    Ok((cube, LabelMap::new(h, w, labels)?))
}

/// Baseline plus three Gaussian absorption/reflection bumps per class.
fn class_signatures(k: usize, bands: usize, rng: &mut RngState) -> Result<Vec<Vec<f64>>> {
    let t = |b: usize| {
        if bands == 1 {
            0.5
        } else {
            b as f64 / (bands - 1) as f64
        }
    };
    for _ in 0..SYNTH_RETRY_CAP {
        let sigs: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let base = rng.uniform_range(0.2, 0.6);
                let bumps: Vec<(f64, f64, f64)> = (0..3)
                    .map(|_| {
                        (
                            rng.uniform_range(-0.3, 0.3),
                            rng.uniform(),
                            rng.uniform_range(0.08, 0.25),
                        )
                    })
                    .collect();
                (0..bands)
                    .map(|b| {
                        let x = t(b);
                        base + bumps
                            .iter()
                            .map(|&(a, mu, s)| a * (-(x - mu).powi(2) / (2.0 * s * s)).exp())
                            .sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        let separated = (0..k).all(|i| {
            (i + 1..k).all(|j| {
                let msd: f64 = sigs[i]
                    .iter()
                    .zip(&sigs[j])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    / bands as f64;
                msd.sqrt() >= MIN_SIGNATURE_GAP
            })
        });
        if separated {
            return Ok(sigs);
        }
    }
    Err(Error::Degenerate(format!(
        "could not draw {k} separated class signatures after {SYNTH_RETRY_CAP} attempts"
    )))
}
