//! Binary parameter checkpoints.
//!
//! Layout: 4-byte magic `QGCK`, u32 LE format version, u32 LE header length,
//! UTF-8 header (the run's config echo plus the seed, for humans and sanity
//! checks), u64 LE value count, then that many f64 LE parameter values in
//! registry order. Loading validates the magic and version and the exact
//! byte length before touching the payload.

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"QGCK";
pub const FORMAT_VERSION: u32 = 1;

pub fn save_checkpoint(path: &Path, header: &str, values: &[f64]) -> Result<()> {
    let header_bytes = header.as_bytes();
    let mut buf =
        Vec::with_capacity(4 + 4 + 4 + header_bytes.len() + 8 + values.len() * 8);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    buf.extend_from_slice(header_bytes);
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_checkpoint(path: &Path) -> Result<(String, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let name = path.display();
    let truncated = || Error::Version(format!("{}: file is truncated", path.display()));
    if bytes.len() < 12 {
        return Err(truncated());
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Version(format!(
            "{name}: not a checkpoint file (bad magic)"
        )));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Version(format!(
            "{name}: format version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count_at = 12 + header_len;
    if bytes.len() < count_at + 8 {
        return Err(truncated());
    }
    let header = std::str::from_utf8(&bytes[12..count_at])
        .map_err(|_| Error::Version(format!("{name}: header is not valid UTF-8")))?
        .to_string();
    let count = u64::from_le_bytes(bytes[count_at..count_at + 8].try_into().unwrap()) as usize;
    let values_at = count_at + 8;
    if bytes.len() != values_at + count * 8 {
        return Err(truncated());
    }
    let values = bytes[values_at..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, values))
}
