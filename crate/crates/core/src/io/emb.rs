//! `EMB1` embedding files.
//!
//! Layout, all little-endian:
//!
//! | offset | size          | content                        |
//! |--------|---------------|--------------------------------|
//! | 0      | 4             | ASCII `EMB1`                   |
//! | 4      | 4             | `rows`, u32                    |
//! | 8      | 4             | `cols`, u32                    |
//! | 12     | rows·cols·4   | binary32 payload, row-major    |

use std::fs;
use std::path::Path;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 12;

pub fn encode_emb1<T: Scalar>(m: &EmbeddingMatrix<T>) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows()).map_err(|_| Error::Malformed("too many rows for EMB1".into()))?;
    let cols = u32::try_from(m.dim()).map_err(|_| Error::Malformed("too many columns for EMB1".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + m.as_slice().len() * 4);
    out.extend_from_slice(EMB1_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for x in m.as_slice() {
        let v = x.to_f32().unwrap_or(f32::NAN);
        if !v.is_finite() {
            return Err(Error::Malformed(format!("value {x} does not fit in binary32")));
        }
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_emb1(bytes: &[u8]) -> Result<EmbeddingMatrix<f32>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Malformed(format!("EMB1 header needs 12 bytes, got {}", bytes.len())));
    }
    if &bytes[..4] != EMB1_MAGIC {
        return Err(Error::Malformed("bad magic, expected EMB1".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Malformed("EMB1 shape overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Malformed(format!(
            "EMB1 payload is {} bytes, {rows}x{cols} needs {expected}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingMatrix::new(rows, cols, data)
}

pub fn read_emb1(path: impl AsRef<Path>) -> Result<EmbeddingMatrix<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_emb1(&bytes).map_err(|e| match e {
        Error::Malformed(msg) => Error::Malformed(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Reads an `EMB1` file and widens it to the working precision.
pub fn read_emb1_as<T: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingMatrix<T>> {
    let m = read_emb1(path)?;
    let data = m.as_slice().iter().map(|&x| T::from_f32_lossy(x)).collect();
    EmbeddingMatrix::new(m.rows(), m.dim(), data)
}

pub fn write_emb1<T: Scalar>(path: impl AsRef<Path>, m: &EmbeddingMatrix<T>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_emb1(m)?).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
