//! GF1 on-disk grid format.
//!
//! A GF1 grid is a JSON header plus a separate raw payload of little-endian
//! `f64` values in row-major order:
//!
//! ```json
//! {"gf1": 1, "dim": 2, "shape": [128, 128], "spacing": 0.015625,
//!  "origin": [-0.9921875, -0.9921875], "payload": "disk.f64"}
//! ```
//!
//! `NaN` encodes an undefined sample; `+inf`/`-inf` are stored verbatim.
//! The payload path is resolved relative to the header's directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, MAX_DIM};

pub const GF1_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gf1Header {
    pub gf1: u32,
    pub dim: usize,
    pub shape: Vec<usize>,
    pub spacing: f64,
    pub origin: Vec<f64>,
    pub payload: String,
}

fn format_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

/// Default payload file name for a header path: `foo.gf1.json` -> `foo.f64`.
pub fn payload_name_for(header: &Path) -> String {
    let name = header.file_name().and_then(|s| s.to_str()).unwrap_or("grid");
    let stem = name
        .strip_suffix(".gf1.json")
        .or_else(|| name.strip_suffix(".json"))
        .unwrap_or(name);
    format!("{stem}.f64")
}

/// Writes `u` as a GF1 header at `path` plus a payload next to it.
pub fn write_grid(u: &GridFunction, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let payload = payload_name_for(path);
    let header = Gf1Header {
        gf1: GF1_VERSION,
        dim: u.dim(),
        shape: u.shape().to_vec(),
        spacing: u.spacing(),
        origin: u.origin().to_vec(),
        payload: payload.clone(),
    };
    let dir = path.parent().unwrap_or_else(|| Path::new(""));
    let payload_path = dir.join(&payload);
    let mut bytes = Vec::with_capacity(u.len() * 8);
    for v in u.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&payload_path, bytes).map_err(|e| Error::io(&payload_path, e))?;
    let mut text = serde_json::to_string_pretty(&serde_json::to_value(&header)?)?;
    text.push('\n');
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Parses and validates a GF1 header.
pub fn parse_header(text: &str) -> Result<Gf1Header> {
    let header: Gf1Header = serde_json::from_str(text).map_err(|e| {
        // serde_json reports line/column; convert to a byte offset.
        let offset = text
            .split_inclusive('\n')
            .take(e.line().saturating_sub(1))
            .map(str::len)
            .sum::<usize>()
            + e.column().saturating_sub(1);
        format_err(offset as u64, format!("header: {e}"))
    })?;
    if header.gf1 != GF1_VERSION {
        return Err(format_err(0, format!("unsupported gf1 version {}", header.gf1)));
    }
    if header.dim == 0 || header.dim > MAX_DIM {
        return Err(Error::DimensionUnsupported(header.dim));
    }
    if header.shape.len() != header.dim || header.origin.len() != header.dim {
        return Err(format_err(0, "shape/origin length does not match dim"));
    }
    Ok(header)
}

/// Reads a GF1 grid from its header path.
pub fn read_grid(path: impl AsRef<Path>) -> Result<GridFunction> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(&text)?;
    let dir = path.parent().unwrap_or_else(|| Path::new(""));
    let payload_path: PathBuf = dir.join(&header.payload);
    let bytes = fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    let values = decode_payload(&header, &bytes)?;
    GridFunction::new(header.shape, header.spacing, header.origin, values)
}

/// Decodes a payload against its header, checking the length exactly.
pub fn decode_payload(header: &Gf1Header, bytes: &[u8]) -> Result<Vec<f64>> {
    let count = header
        .shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| format_err(0, "shape product overflows"))?;
    let expected = count * 8;
    if bytes.len() != expected {
        let offset = bytes.len().min(expected) as u64;
        return Err(format_err(
            offset,
            format!("payload holds {} bytes, header implies {expected}", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}
