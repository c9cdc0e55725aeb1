//! `WFLD` binary flow export.
//!
//! Layout: magic `WFLD`, then little-endian `u32` version (1), `u32` height,
//! `u32` width, then `height * width` pairs of little-endian `f32` NDC source
//! coordinates `(u, v)`, row-major from the top-left pixel.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::FlowField;

pub const MAGIC: &[u8; 4] = b"WFLD";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn encode_wfld(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * flow.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(flow.height() as u32).to_le_bytes());
    out.extend_from_slice(&(flow.width() as u32).to_le_bytes());
    for p in flow.data() {
        out.extend_from_slice(&(p[0] as f32).to_le_bytes());
        out.extend_from_slice(&(p[1] as f32).to_le_bytes());
    }
    out
}

fn le_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

fn le_f32(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub fn decode_wfld(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("WFLD header needs {HEADER_LEN} bytes, got {}", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("missing WFLD magic".into()));
    }
    let version = le_u32(bytes, 4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported WFLD version {version}")));
    }
    let height = le_u32(bytes, 8) as usize;
    let width = le_u32(bytes, 12) as usize;
    let expected = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format(format!("WFLD dimensions {height}x{width} overflow")))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "WFLD {height}x{width} needs {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| [f64::from(le_f32(c, 0)), f64::from(le_f32(c, 4))])
        .collect();
    FlowField::new(height, width, data).map_err(|e| Error::Format(format!("WFLD payload: {e}")))
}

pub fn write_wfld(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path.as_ref(), &encode_wfld(flow))
}

pub fn read_wfld(path: impl AsRef<Path>) -> Result<FlowField> {
    decode_wfld(&super::read_file(path.as_ref())?)
}
