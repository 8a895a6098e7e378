//! Cluster maps as binary PPM (P6) images.

use std::path::Path;

use crate::data::LabelMap;
use crate::error::{Error, Result};

/// Background (label 0) color.
pub const BACKGROUND: [u8; 3] = [0, 0, 0];

/// Cluster `i` (1-based) gets `PALETTE[(i - 1) % 16]`.
pub const PALETTE: [[u8; 3]; 16] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [220, 190, 255],
    [170, 110, 40],
    [255, 250, 200],
    [128, 0, 0],
    [170, 255, 195],
];

pub fn color_of(label: u16) -> [u8; 3] {
    match label {
        0 => BACKGROUND,
        l => PALETTE[(l as usize - 1) % PALETTE.len()],
    }
}

pub fn render_ppm(map: &LabelMap) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    out.reserve(map.labels().len() * 3);
    for &l in map.labels() {
        out.extend_from_slice(&color_of(l));
    }
    out
}

pub fn write_ppm(map: &LabelMap, path: &Path) -> Result<()> {
    std::fs::write(path, render_ppm(map)).map_err(|e| Error::io(path, e))
}
