//! Grayscale PFM depth maps.
//!
//! Header `"Pf\n<w> <h>\n<scale>\n"`, then float32 rows from the bottom of the
//! image to the top. A negative scale means little-endian samples. Depths that
//! are non-positive or non-finite load as invalid nodes and are written as `0`.

use crate::error::{Error, Result};
use crate::observation::depth::DepthMap;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_whitespace(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next whitespace-delimited token.
    fn token(&mut self, what: &str) -> Result<(usize, &str)> {
        self.skip_whitespace();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start, format!("missing {what} in PFM header")));
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::format(start, format!("non-ASCII {what} in PFM header")))?;
        Ok((start, s))
    }
}

pub fn read_pfm(bytes: &[u8]) -> Result<DepthMap> {
    if bytes.len() < 3 || bytes[0] != b'P' || !bytes[2].is_ascii_whitespace() {
        return Err(Error::format(0, "missing PFM signature"));
    }
    match bytes[1] {
        b'f' => {}
        b'F' => return Err(Error::UnsupportedFormat("color PFM (PF); expected grayscale Pf".into())),
        _ => return Err(Error::format(1, "unknown PFM signature")),
    }
    let mut cur = Cursor { bytes, pos: 2 };
    let parse_dim = |(at, s): (usize, &str), what: &str| -> Result<usize> {
        s.parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::format(at, format!("invalid PFM {what} '{s}'")))
    };
    let w = parse_dim(cur.token("width")?, "width")?;
    let h = parse_dim(cur.token("height")?, "height")?;
    let (at, s) = cur.token("scale")?;
    let scale: f64 = s
        .parse()
        .ok()
        .filter(|x: &f64| x.is_finite() && *x != 0.0)
        .ok_or_else(|| Error::format(at, format!("invalid PFM scale '{s}'")))?;
    let little_endian = scale < 0.0;
    // Exactly one whitespace byte separates the header from the samples.
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(Error::format(cur.pos, "PFM header not terminated"));
    }
    let data = cur.pos + 1;
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(data))
        .ok_or_else(|| Error::format(data, "PFM dimensions overflow"))?;
    if bytes.len() < expected {
        return Err(Error::format(
            bytes.len(),
            format!("truncated PFM payload, expected {expected} bytes"),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(expected, "trailing bytes after PFM payload"));
    }

    let mut map = DepthMap::invalid(w, h);
    for file_row in 0..h {
        let row = h - 1 - file_row;
        for col in 0..w {
            let at = data + 4 * (file_row * w + col);
            let raw: [u8; 4] = bytes[at..at + 4].try_into().unwrap();
            let z = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            map.set(row * w + col, z as f64);
        }
    }
    Ok(map)
}

/// Serializes a depth map as little-endian grayscale PFM.
pub fn write_pfm(map: &DepthMap) -> Vec<u8> {
    let (w, h) = (map.width(), map.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(4 * w * h);
    for file_row in 0..h {
        let row = h - 1 - file_row;
        for col in 0..w {
            let z = map.get(row * w + col).map_or(0.0, |z| z as f32);
            out.extend_from_slice(&z.to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_one_little_endian() {
        let mut bytes = b"Pf\n2 1\n-1.0\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_le_bytes());
        bytes.extend_from_slice(&2.5f32.to_le_bytes());
        let m = read_pfm(&bytes).unwrap();
        assert_eq!((m.width(), m.height()), (2, 1));
        assert_eq!(m.get(0), Some(1.5));
        assert_eq!(m.get(1), Some(2.5));
        assert_eq!(write_pfm(&m), bytes);
    }

    #[test]
    fn big_endian_and_row_order() {
        let mut bytes = b"Pf\n1 2\n1.0\n".to_vec();
        bytes.extend_from_slice(&3.0f32.to_be_bytes()); // bottom row
        bytes.extend_from_slice(&4.0f32.to_be_bytes()); // top row
        let m = read_pfm(&bytes).unwrap();
        assert_eq!(m.get(0), Some(4.0));
        assert_eq!(m.get(1), Some(3.0));
    }

    #[test]
    fn zero_negative_and_nan_depths_are_invalid() {
        let mut bytes = b"Pf\n3 1\n-1.0\n".to_vec();
        for z in [0.0f32, -2.0, f32::NAN] {
            bytes.extend_from_slice(&z.to_le_bytes());
        }
        let m = read_pfm(&bytes).unwrap();
        assert_eq!(m.valid_count(), 0);
    }

    #[test]
    fn color_pfm_unsupported() {
        let mut bytes = b"PF\n1 1\n-1.0\n".to_vec();
        bytes.extend_from_slice(&[0u8; 12]);
        assert!(matches!(read_pfm(&bytes), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(read_pfm(b"P5\n1 1\n255\n"), Err(Error::Format { .. })));
        assert!(matches!(read_pfm(b"Pf\nx 1\n-1.0\n"), Err(Error::Format { offset: 3, .. })));
        assert!(matches!(read_pfm(b"Pf\n1 1\n0\n\0\0\0\0"), Err(Error::Format { .. })));
        assert!(matches!(read_pfm(b"Pf\n1 1\n-1.0"), Err(Error::Format { .. })));
        assert!(matches!(read_pfm(b"Pf\n1 1\n-1.0\n\0\0"), Err(Error::Format { offset: 14, .. })));
    }
}
