//! Two-file container: a `key: value` text header plus a raw little-endian
//! payload next to it (`<stem>.hdr` + `<stem>.raw`).
//!
//! ```text
//! MLGSC-CUBE v1
//! height: 30
//! width: 30
//! bands: 20
//! dtype: f32
//! byte_order: little
//! ```
//!
//! Cube payloads are `f32` in band-interleaved-by-pixel order. Label maps use
//! the magic `MLGSC-LABELS v1`, `dtype: u16`, no `bands` key, row-major.

use std::fs;
use std::path::{Path, PathBuf};

use super::{HsiCube, LabelMap};
use crate::error::{Error, Result};

pub const CUBE_MAGIC: &str = "MLGSC-CUBE v1";
pub const LABELS_MAGIC: &str = "MLGSC-LABELS v1";

/// Header and payload paths for a container given either file or the stem.
pub fn header_and_payload_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("hdr") | Some("raw") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut hdr = stem.clone().into_os_string();
    hdr.push(".hdr");
    let mut raw = stem.into_os_string();
    raw.push(".raw");
    (hdr.into(), raw.into())
}

struct Header {
    height: usize,
    width: usize,
    bands: Option<usize>,
    wavelength_nm: Option<Vec<f64>>,
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

fn parse_header(text: &str, magic: &str, dtype: &str, with_bands: bool) -> Result<Header> {
    let mut offset = 0;
    let mut lines = text.split_inclusive('\n');
    let first = lines.next().unwrap_or("");
    if first.trim_end() != magic {
        return Err(parse_err(0, format!("expected magic line `{magic}`")));
    }
    offset += first.len();

    let mut height = None;
    let mut width = None;
    let mut bands = None;
    let mut wavelength_nm = None;
    let mut saw_dtype = false;
    let mut saw_order = false;
    for line in lines {
        let here = offset;
        offset += line.len();
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once(':')
            .ok_or_else(|| parse_err(here, format!("expected `key: value`, got `{trimmed}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let count = |v: &str| -> Result<usize> {
            let n: usize = v
                .parse()
                .map_err(|_| parse_err(here, format!("`{key}` must be a non-negative integer")))?;
            if n == 0 {
                return Err(parse_err(here, format!("`{key}` must be positive (empty data rejected)")));
            }
            Ok(n)
        };
        match key {
            "height" => height = Some(count(value)?),
            "width" => width = Some(count(value)?),
            "bands" if with_bands => bands = Some(count(value)?),
            "dtype" => {
                if value != dtype {
                    return Err(parse_err(here, format!("unsupported dtype `{value}`, expected `{dtype}`")));
                }
                saw_dtype = true;
            }
            "byte_order" => {
                if value != "little" {
                    return Err(parse_err(here, format!("unsupported byte_order `{value}`")));
                }
                saw_order = true;
            }
            "wavelength_nm" if with_bands => {
                let w: std::result::Result<Vec<f64>, _> =
                    value.split_whitespace().map(str::parse::<f64>).collect();
                wavelength_nm = Some(w.map_err(|_| parse_err(here, "bad wavelength list"))?);
            }
            other => return Err(parse_err(here, format!("unknown header key `{other}`"))),
        }
    }
    let missing = |k: &str| parse_err(offset, format!("missing header key `{k}`"));
    let height = height.ok_or_else(|| missing("height"))?;
    let width = width.ok_or_else(|| missing("width"))?;
    if with_bands && bands.is_none() {
        return Err(missing("bands"));
    }
    if !saw_dtype {
        return Err(missing("dtype"));
    }
    if !saw_order {
        return Err(missing("byte_order"));
    }
    Ok(Header {
        height,
        width,
        bands,
        wavelength_nm,
    })
}

fn read_pair(path: &Path) -> Result<(String, Vec<u8>, PathBuf)> {
    let (hdr, raw) = header_and_payload_paths(path);
    let text = fs::read_to_string(&hdr).map_err(|e| Error::io(&hdr, e))?;
    let payload = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    Ok((text, payload, hdr))
}

fn write_pair(path: &Path, header: &str, payload: &[u8]) -> Result<()> {
    let (hdr, raw) = header_and_payload_paths(path);
    fs::write(&hdr, header).map_err(|e| Error::io(&hdr, e))?;
    fs::write(&raw, payload).map_err(|e| Error::io(&raw, e))?;
    Ok(())
}

pub fn load_cube(path: &Path) -> Result<HsiCube> {
    let (text, payload, hdr) = read_pair(path)?;
    let h = parse_header(&text, CUBE_MAGIC, "f32", true)
        .map_err(|e| e.context(format!("reading {}", hdr.display())))?;
    let bands = h.bands.expect("checked by parser");
    let expected = h.height * h.width * bands * 4;
    if payload.len() != expected {
        return Err(Error::Integrity {
            expected,
            actual: payload.len(),
        });
    }
    let mut values = Vec::with_capacity(expected / 4);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if !v.is_finite() {
            return Err(parse_err(i * 4, "non-finite value in cube payload"));
        }
        values.push(v as f64);
    }
    let cube = HsiCube::new(h.height, h.width, bands, values)?;
    match h.wavelength_nm {
        Some(w) => cube.with_wavelengths(w),
        None => Ok(cube),
    }
}

pub fn save_cube(cube: &HsiCube, path: &Path) -> Result<()> {
    let mut header = format!(
        "{CUBE_MAGIC}\nheight: {}\nwidth: {}\nbands: {}\ndtype: f32\nbyte_order: little\n",
        cube.height(),
        cube.width(),
        cube.bands()
    );
    if let Some(w) = cube.wavelength_nm() {
        let list: Vec<String> = w.iter().map(|x| x.to_string()).collect();
        header.push_str(&format!("wavelength_nm: {}\n", list.join(" ")));
    }
    let mut payload = Vec::with_capacity(cube.values().len() * 4);
    for &v in cube.values() {
        payload.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_pair(path, &header, &payload)
}

pub fn load_labels(path: &Path) -> Result<LabelMap> {
    let (text, payload, hdr) = read_pair(path)?;
    let h = parse_header(&text, LABELS_MAGIC, "u16", false)
        .map_err(|e| e.context(format!("reading {}", hdr.display())))?;
    let expected = h.height * h.width * 2;
    if payload.len() != expected {
        return Err(Error::Integrity {
            expected,
            actual: payload.len(),
        });
    }
    let labels = payload
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    LabelMap::new(h.height, h.width, labels)
}

pub fn save_labels(labels: &LabelMap, path: &Path) -> Result<()> {
    let header = format!(
        "{LABELS_MAGIC}\nheight: {}\nwidth: {}\ndtype: u16\nbyte_order: little\n",
        labels.height(),
        labels.width()
    );
    let payload: Vec<u8> = labels.labels().iter().flat_map(|l| l.to_le_bytes()).collect();
    write_pair(path, &header, &payload)
}
