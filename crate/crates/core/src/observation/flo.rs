//! Middlebury `.flo` optical flow files.
//!
//! Layout (little-endian): float32 magic `202021.25` (`"PIEH"`), int32 width,
//! int32 height, then `width * height` interleaved `(u, v)` float32 pairs in
//! row-major order. Components with magnitude above `1e9` mark unknown flow.

use crate::error::{Error, Result};
use crate::observation::flow::FlowField;

pub const FLO_MAGIC: f32 = 202021.25;
/// Values with larger magnitude are unknown flow.
pub const UNKNOWN_FLOW_THRESHOLD: f32 = 1e9;
/// Written for invalid nodes.
pub const UNKNOWN_FLOW: f32 = 1e10;

const HEADER_LEN: usize = 12;

fn le_f32(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn le_i32(bytes: &[u8], at: usize) -> i32 {
    i32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn read_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 4 {
        return Err(Error::format(bytes.len(), "truncated .flo magic"));
    }
    let magic = le_f32(bytes, 0);
    if magic.to_bits() != FLO_MAGIC.to_bits() {
        return Err(Error::format(0, format!("bad .flo magic {magic}")));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(bytes.len(), "truncated .flo header"));
    }
    let (w, h) = (le_i32(bytes, 4), le_i32(bytes, 8));
    if w <= 0 {
        return Err(Error::format(4, format!("invalid .flo width {w}")));
    }
    if h <= 0 {
        return Err(Error::format(8, format!("invalid .flo height {h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::format(4, "flow dimensions overflow"))?;
    if bytes.len() < expected {
        return Err(Error::format(
            bytes.len(),
            format!("truncated .flo payload, expected {expected} bytes"),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(expected, "trailing bytes after .flo payload"));
    }

    let mut field = FlowField::invalid(w, h);
    for i in 0..w * h {
        let at = HEADER_LEN + 8 * i;
        let (u, v) = (le_f32(bytes, at), le_f32(bytes, at + 4));
        let known = |x: f32| x.is_finite() && x.abs() <= UNKNOWN_FLOW_THRESHOLD;
        if known(u) && known(v) {
            field.set(i, [u as f64, v as f64])?;
        }
    }
    Ok(field)
}

/// Serializes a flow field; invalid nodes are written as [`UNKNOWN_FLOW`].
pub fn write_flo(field: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * field.len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(field.width() as i32).to_le_bytes());
    out.extend_from_slice(&(field.height() as i32).to_le_bytes());
    for i in 0..field.len() {
        let [u, v] = field
            .get(i)
            .map(|d| [d[0] as f32, d[1] as f32])
            .unwrap_or([UNKNOWN_FLOW; 2]);
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}
