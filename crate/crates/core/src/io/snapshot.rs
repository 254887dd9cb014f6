//! Self-describing binary field snapshots.
//!
//! Byte layout, all little-endian:
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 8 | magic `SHSNAP\0\0` |
//! | 8 | 4 | format version (`u32`, currently 1) |
//! | 12 | 4 | `dim` (`u32`) |
//! | 16 | 8 | `M` (`u64`) |
//! | 24 | 8 | `L` (`f64`) |
//! | 32 | 8 | `tau` (`f64`) |
//! | 40 | 8 | level `n` (`u64`) |
//! | 48 | 8 | time `t` (`f64`) |
//! | 56 | 8 | `g` (`f64`) |
//! | 64 | 8 | `eps` (`f64`) |
//! | 72 | `8 M^dim` | values (`f64`, row-major, last axis fastest) |

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::grid::{GridError, GridField, GridSpec, ModelParams};

pub const SNAPSHOT_MAGIC: [u8; 8] = *b"SHSNAP\0\0";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const SNAPSHOT_HEADER_LEN: usize = 72;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("not a snapshot file")]
    NotSnapshot,
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("payload size mismatch: expected {expected} bytes, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("invalid snapshot header: {0}")]
    Header(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub points: usize,
    pub length: f64,
    pub tau: f64,
    pub level: usize,
    pub time: f64,
    pub g: f64,
    pub eps: f64,
}

impl SnapshotHeader {
    pub fn new(spec: &GridSpec, tau: f64, level: usize, params: &ModelParams) -> Self {
        Self {
            dim: spec.dim(),
            points: spec.points(),
            length: spec.length(),
            tau,
            level,
            time: level as f64 * tau,
            g: params.g,
            eps: params.eps,
        }
    }

    pub fn grid(&self) -> Result<GridSpec, GridError> {
        GridSpec::new(self.dim, self.length, self.points)
    }

    pub fn params(&self) -> ModelParams {
        ModelParams::new(self.g, self.eps)
    }
}

pub(crate) fn put_f64s(buf: &mut Vec<u8>, vals: &[f64]) {
    buf.reserve(8 * vals.len());
    for v in vals {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn read_f64s(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect()
}

/// Little-endian cursor over a byte slice.
pub(crate) struct Reader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    pub fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    pub fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    pub fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    pub fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos.min(self.bytes.len())..]
    }
}

pub fn encode_snapshot(header: &SnapshotHeader, field: &GridField) -> Vec<u8> {
    let mut buf = Vec::with_capacity(SNAPSHOT_HEADER_LEN + 8 * field.values().len());
    buf.extend_from_slice(&SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(header.points as u64).to_le_bytes());
    for v in [header.length, header.tau] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&(header.level as u64).to_le_bytes());
    for v in [header.time, header.g, header.eps] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    put_f64s(&mut buf, field.values());
    buf
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(SnapshotHeader, GridField), SnapshotError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8) != Some(&SNAPSHOT_MAGIC[..]) {
        return Err(SnapshotError::NotSnapshot);
    }
    let short = || SnapshotError::SizeMismatch {
        expected: SNAPSHOT_HEADER_LEN,
        found: bytes.len(),
    };
    let version = r.u32().ok_or_else(short)?;
    if version != SNAPSHOT_VERSION {
        return Err(SnapshotError::Version(version));
    }
    let dim = r.u32().ok_or_else(short)? as usize;
    let points = r.u64().ok_or_else(short)? as usize;
    let length = r.f64().ok_or_else(short)?;
    let tau = r.f64().ok_or_else(short)?;
    let level = r.u64().ok_or_else(short)? as usize;
    let time = r.f64().ok_or_else(short)?;
    let g = r.f64().ok_or_else(short)?;
    let eps = r.f64().ok_or_else(short)?;
    let header = SnapshotHeader {
        dim,
        points,
        length,
        tau,
        level,
        time,
        g,
        eps,
    };
    let spec = header.grid()?;
    let payload = r.rest();
    let expected = spec.len() * 8;
    if payload.len() != expected {
        return Err(SnapshotError::SizeMismatch {
            expected,
            found: payload.len(),
        });
    }
    let field = GridField::new(spec, read_f64s(payload))?;
    Ok((header, field))
}

pub fn write_snapshot(
    path: &Path,
    header: &SnapshotHeader,
    field: &GridField,
) -> Result<(), SnapshotError> {
    std::fs::write(path, encode_snapshot(header, field))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, GridField), SnapshotError> {
    decode_snapshot(&std::fs::read(path)?)
}

/// Whitespace-separated `x_1 .. x_dim value` lines for plotting tools, with a
/// blank line after each run of the last axis.
pub fn export_text(field: &GridField) -> String {
    let spec = field.spec();
    let m = spec.points();
    let mut out = String::new();
    for (i, v) in field.values().iter().enumerate() {
        for x in spec.coords(i) {
            let _ = write!(out, "{x:.10e} ");
        }
        let _ = writeln!(out, "{v:.16e}");
        if (i + 1) % m == 0 {
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (SnapshotHeader, GridField) {
        let spec = GridSpec::new(2, 3.5, 8).unwrap();
        let field = GridField::from_fn(spec, |x| (x[0] * 1.7).sin() * (x[1] + 0.1).ln());
        let header = SnapshotHeader::new(&spec, 0.1, 7, &ModelParams::new(0.5, 0.25));
        (header, field)
    }

    #[test]
    fn layout_and_roundtrip() {
        let (h, f) = sample();
        let bytes = encode_snapshot(&h, &f);
        assert_eq!(bytes.len(), SNAPSHOT_HEADER_LEN + 64 * 8);
        assert_eq!(&bytes[..8], b"SHSNAP\0\0");
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 8);
        let (h2, f2) = decode_snapshot(&bytes).unwrap();
        assert_eq!(h2, h);
        assert!(f.values().iter().zip(f2.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn truncated_and_foreign_files() {
        let (h, f) = sample();
        let bytes = encode_snapshot(&h, &f);
        let err = decode_snapshot(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(err.to_string().starts_with("payload size mismatch"));
        let err = decode_snapshot(&bytes[..20]).unwrap_err();
        assert!(err.to_string().starts_with("payload size mismatch"));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(decode_snapshot(&bad).unwrap_err().to_string(), "not a snapshot file");
        assert_eq!(decode_snapshot(b"").unwrap_err().to_string(), "not a snapshot file");
        let mut v2 = bytes;
        v2[8] = 2;
        assert!(matches!(decode_snapshot(&v2), Err(SnapshotError::Version(2))));
    }

    #[test]
    fn text_export_shape() {
        let (_, f) = sample();
        let text = export_text(&f);
        assert_eq!(text.lines().filter(|l| !l.is_empty()).count(), 64);
        assert_eq!(text.lines().filter(|l| l.is_empty()).count(), 8);
        assert_eq!(text.lines().next().unwrap().split_whitespace().count(), 3);
    }
}
