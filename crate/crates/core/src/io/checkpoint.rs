//! Restart files: every stored history level, the level index, the level-0
//! energy, the startup pair while it is still needed, and the digest of the
//! configuration that produced them.
//!
//! Layout (little-endian): magic `SHCKPT\0\0`, version `u32`, 64 ASCII hex
//! digest bytes, `dim u32`, `M u64`, `L f64`, `tau f64`, `n u64`, `e0 f64`,
//! stored-level count `u32`, startup flag `u8`, then the stored levels newest
//! first, then `phi0` and `phi1` if the flag is set.

use std::path::Path;

use thiserror::Error;

use super::config::RunConfig;
use super::snapshot::{put_f64s, read_f64s, Reader};
use crate::bdf::{BdfError, Startup, TimeHistory};
use crate::grid::{GridError, GridField, GridSpec};
use crate::solver::Simulation;

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"SHCKPT\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file")]
    NotCheckpoint,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint is truncated or has trailing bytes")]
    Truncated,
    #[error("configuration digest mismatch: checkpoint was written by a run with different parameters")]
    DigestMismatch,
    #[error("checkpoint grid or step does not match the configuration")]
    GridMismatch,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Bdf(#[from] BdfError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub digest: String,
    pub history: TimeHistory,
    pub e0: f64,
    pub startup: Option<Startup>,
}

impl Checkpoint {
    pub fn capture(sim: &Simulation, digest: String) -> Self {
        Self {
            digest,
            history: sim.history().clone(),
            e0: sim.initial_energy(),
            startup: if sim.level() == 0 {
                sim.startup().cloned()
            } else {
                None
            },
        }
    }

    pub fn level(&self) -> usize {
        self.history.n()
    }

    /// Refuses checkpoints from a run with a different digest or grid.
    pub fn check_against(&self, cfg: &RunConfig) -> Result<(), CheckpointError> {
        if self.digest != cfg.digest() {
            return Err(CheckpointError::DigestMismatch);
        }
        if self.history.newest().spec() != &cfg.grid() || self.history.tau() != cfg.tau {
            return Err(CheckpointError::GridMismatch);
        }
        Ok(())
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let spec = *ck.history.newest().spec();
    let mut buf = Vec::new();
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let mut digest = [b'0'; 64];
    let d = ck.digest.as_bytes();
    digest[..d.len().min(64)].copy_from_slice(&d[..d.len().min(64)]);
    buf.extend_from_slice(&digest);
    buf.extend_from_slice(&(spec.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(spec.points() as u64).to_le_bytes());
    buf.extend_from_slice(&spec.length().to_le_bytes());
    buf.extend_from_slice(&ck.history.tau().to_le_bytes());
    buf.extend_from_slice(&(ck.history.n() as u64).to_le_bytes());
    buf.extend_from_slice(&ck.e0.to_le_bytes());
    buf.extend_from_slice(&(ck.history.stored() as u32).to_le_bytes());
    buf.push(u8::from(ck.startup.is_some()));
    for level in ck.history.levels() {
        put_f64s(&mut buf, level.values());
    }
    if let Some(s) = &ck.startup {
        put_f64s(&mut buf, s.phi0.values());
        put_f64s(&mut buf, s.phi1.values());
    }
    buf
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8) != Some(&CHECKPOINT_MAGIC[..]) {
        return Err(CheckpointError::NotCheckpoint);
    }
    let version = r.u32().ok_or(CheckpointError::Truncated)?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let digest = String::from_utf8_lossy(r.take(64).ok_or(CheckpointError::Truncated)?).into_owned();
    let dim = r.u32().ok_or(CheckpointError::Truncated)? as usize;
    let points = r.u64().ok_or(CheckpointError::Truncated)? as usize;
    let length = r.f64().ok_or(CheckpointError::Truncated)?;
    let tau = r.f64().ok_or(CheckpointError::Truncated)?;
    let n = r.u64().ok_or(CheckpointError::Truncated)? as usize;
    let e0 = r.f64().ok_or(CheckpointError::Truncated)?;
    let stored = r.u32().ok_or(CheckpointError::Truncated)? as usize;
    let has_startup = r.take(1).ok_or(CheckpointError::Truncated)?[0] != 0;
    let spec = GridSpec::new(dim, length, points)?;
    let field_bytes = spec.len() * 8;
    let read_field = |r: &mut Reader| -> Result<GridField, CheckpointError> {
        let raw = r.take(field_bytes).ok_or(CheckpointError::Truncated)?;
        Ok(GridField::new(spec, read_f64s(raw))?)
    };
    let levels = (0..stored.min(3))
        .map(|_| read_field(&mut r))
        .collect::<Result<Vec<_>, _>>()?;
    let startup = if has_startup {
        Some(Startup {
            phi0: read_field(&mut r)?,
            phi1: read_field(&mut r)?,
        })
    } else {
        None
    };
    if !r.rest().is_empty() {
        return Err(CheckpointError::Truncated);
    }
    let history = TimeHistory::from_levels(tau, n, levels)?;
    if n == 0 && startup.is_none() {
        return Err(BdfError::MissingStartup.into());
    }
    Ok(Checkpoint {
        digest,
        history,
        e0,
        startup,
    })
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode_checkpoint(ck))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdf::{initial_level, SignMode};
    use crate::grid::ModelParams;

    fn level0() -> Checkpoint {
        let spec = GridSpec::new(2, 5.0, 6).unwrap();
        let phi0 = GridField::from_fn(spec, |x| 0.1 * x[0].cos() + 0.05 * x[1]);
        let p = ModelParams::new(0.5, 0.25);
        let (u0, startup) = initial_level(&phi0, 0.1, &p, SignMode::Corrected, None).unwrap();
        Checkpoint {
            digest: "ab".repeat(32),
            history: TimeHistory::new(u0, 0.1).unwrap(),
            e0: 1.25,
            startup: Some(startup),
        }
    }

    #[test]
    fn roundtrip_with_startup_pair() {
        let ck = level0();
        let back = decode_checkpoint(&encode_checkpoint(&ck)).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn roundtrip_full_history() {
        let mut ck = level0();
        for k in 1..=4 {
            let next = ck.history.newest().map(|v| v * 0.9 + 0.01 * k as f64);
            ck.history.push(next).unwrap();
        }
        ck.startup = None;
        let back = decode_checkpoint(&encode_checkpoint(&ck)).unwrap();
        assert_eq!(back.history.n(), 4);
        assert_eq!(back.history.stored(), 3);
        assert_eq!(back, ck);
    }

    #[test]
    fn corrupt_inputs() {
        let bytes = encode_checkpoint(&level0());
        assert!(matches!(decode_checkpoint(&bytes[..bytes.len() - 1]), Err(CheckpointError::Truncated)));
        assert!(matches!(decode_checkpoint(b"SHSNAP\0\0"), Err(CheckpointError::NotCheckpoint)));
    }
}
