use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of the loss history. Disabled components are empty cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub cnode: Option<f64>,
    pub dnode: Option<f64>,
    pub graph: Option<f64>,
    pub se: Option<f64>,
    /// Loss weights `exp(-alpha_i)`.
    pub w_cnode: f64,
    pub w_dnode: f64,
    pub w_graph: f64,
    pub w_se: f64,
    pub total: f64,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            offset: 0,
            message: format!("{}: {other:?}", path.display()),
        },
    }
}

pub fn write_history(path: &Path, records: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_history(path: &Path) -> Result<Vec<EpochRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        let rec: EpochRecord = rec.map_err(|e| {
            let offset = e.position().map_or(0, |p| p.byte() as usize);
            match csv_err(path, e) {
                Error::Parse { message, .. } => Error::Parse { offset, message },
                other => other,
            }
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Trailing moving average with the given window (shorter at the start).
pub fn smoothed(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            values[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}
