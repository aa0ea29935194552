//! Binary matrix files: the magic bytes `OIDM`, a `u32` version, `u64` row
//! and column counts, then the entries in row-major order, all little-endian.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OIDM";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

pub fn encode_matrix(m: &DMatrix<f64>) -> Result<Vec<u8>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix", "entries must be finite"));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::CorruptMatrix(format!(
            "file has {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::CorruptMatrix("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::CorruptMatrix(format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| Error::CorruptMatrix(format!("dimensions {rows}x{cols} overflow")))?;
    if bytes.len() as u64 != expected {
        return Err(Error::CorruptMatrix(format!(
            "length mismatch: {rows}x{cols} needs {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let payload = &bytes[HEADER_LEN..];
    Ok(DMatrix::from_fn(rows, cols, |i, j| {
        let k = 8 * (i * cols + j);
        f64::from_le_bytes(payload[k..k + 8].try_into().expect("8 bytes"))
    }))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let bytes = encode_matrix(m)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_matrix(&bytes)
}

/// Store a vector as a single column.
pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    write_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(Error::CorruptMatrix(format!("expected a column vector, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(DVector::from_column_slice(m.as_slice()))
}
