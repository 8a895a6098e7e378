//! Binary state container.
//!
//! ```text
//! "MLGSC-STATE v1\n"
//! u32 block count
//! per block: u32 name length, name (UTF-8), u64 rows, u64 cols, rows*cols f64
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const STATE_MAGIC: &[u8] = b"MLGSC-STATE v1\n";

pub fn encode_blocks(blocks: &[(String, Matrix)]) -> Vec<u8> {
    let mut out = STATE_MAGIC.to_vec();
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for (name, m) in blocks {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
        for v in m.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Parse {
                offset: self.pos,
                message: format!("state file truncated while reading {what}"),
            }),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_blocks(bytes: &[u8]) -> Result<Vec<(String, Matrix)>> {
    if !bytes.starts_with(STATE_MAGIC) {
        return Err(Error::Parse {
            offset: 0,
            message: "missing MLGSC-STATE v1 magic".into(),
        });
    }
    let mut cur = Cursor {
        bytes,
        pos: STATE_MAGIC.len(),
    };
    let count = cur.u32("block count")?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let at = cur.pos;
        let len = cur.u32("block name length")? as usize;
        let name = std::str::from_utf8(cur.take(len, "block name")?)
            .map_err(|_| Error::Parse {
                offset: at,
                message: "block name is not UTF-8".into(),
            })?
            .to_string();
        let rows = cur.u64("block rows")? as usize;
        let cols = cur.u64("block cols")? as usize;
        let n = rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or_else(|| Error::Parse {
            offset: at,
            message: format!("block `{name}` dimensions overflow"),
        })?;
        let data = cur
            .take(n, &format!("block `{name}`"))?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push((name, Matrix::from_vec(rows, cols, data)?));
    }
    if cur.pos != bytes.len() {
        return Err(Error::Parse {
            offset: cur.pos,
            message: "trailing bytes after the last block".into(),
        });
    }
    Ok(out)
}

pub fn write_blocks(path: &Path, blocks: &[(String, Matrix)]) -> Result<()> {
    fs::write(path, encode_blocks(blocks)).map_err(|e| Error::io(path, e))
}

pub fn read_blocks(path: &Path) -> Result<Vec<(String, Matrix)>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_blocks(&bytes).map_err(|e| e.context(format!("reading {}", path.display())))
}
