//! Binary checkpoint format.
//!
//! ```text
//! magic        8 bytes  "FOLICKPT"
//! version      u32
//! activation   u8       0 = relu, 1 = tanh
//! step         u64
//! epoch        u64
//! lr           f64
//! batch_size   u64
//! epochs       u64
//! seed         u64
//! trace_every  u64
//! fingerprint  32 bytes (dataset SHA-256)
//! n_dims       u32, then n_dims x u64 layer dims
//! params       f64 x d (per layer: weights row-major, then biases)
//! crc32        u32 over every preceding byte
//! ```
//! All integers and floats little-endian.

use super::TrainConfig;
use crate::net::{Activation, NetParams};
use std::fs;
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FOLICKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint version {found} is newer than supported version {supported}")]
    Version { found: u32, supported: u32 },
    #[error("checkpoint checksum mismatch (truncated or corrupt file)")]
    Checksum,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// SGD updates applied so far.
    pub step: u64,
    pub epoch: u64,
    pub params: NetParams,
    pub config: TrainConfig,
    pub fingerprint: [u8; 32],
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let p = &ckpt.params;
    let mut out = Vec::with_capacity(128 + 8 * p.num_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(match p.activation {
        Activation::Relu => 0,
        Activation::Tanh => 1,
    });
    out.extend_from_slice(&ckpt.step.to_le_bytes());
    out.extend_from_slice(&ckpt.epoch.to_le_bytes());
    let c = &ckpt.config;
    out.extend_from_slice(&c.learning_rate.to_le_bytes());
    for v in [c.batch_size as u64, c.epochs as u64, c.seed, c.trace_every as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&ckpt.fingerprint);
    out.extend_from_slice(&(p.layer_dims.len() as u32).to_le_bytes());
    for &d in &p.layer_dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in p.flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .at
            .checked_add(k)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| CheckpointError::Malformed("unexpected end of payload".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < 8 {
        return Err(CheckpointError::Checksum);
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < 16 {
        return Err(CheckpointError::Checksum);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version > CHECKPOINT_VERSION {
        return Err(CheckpointError::Version {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let (payload, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(payload) != stored {
        return Err(CheckpointError::Checksum);
    }
    let mut r = Reader { bytes: payload, at: 12 };
    let activation = match r.take(1)?[0] {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        other => return Err(CheckpointError::Malformed(format!("activation tag {other}"))),
    };
    let step = r.u64()?;
    let epoch = r.u64()?;
    let config = TrainConfig {
        learning_rate: r.f64()?,
        batch_size: r.u64()? as usize,
        epochs: r.u64()? as usize,
        seed: r.u64()?,
        trace_every: r.u64()? as usize,
    };
    let fingerprint: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    let n_dims = r.u32()? as usize;
    if n_dims > 1024 {
        return Err(CheckpointError::Malformed(format!("{n_dims} layer dims")));
    }
    let dims = (0..n_dims)
        .map(|_| r.u64().map(|d| d as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let template = NetParams::zeros(&dims, activation)
        .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    let d = template.num_params();
    if payload.len() - r.at != 8 * d {
        return Err(CheckpointError::Malformed(format!(
            "expected {d} parameters, found {} bytes",
            payload.len() - r.at
        )));
    }
    let flat = (0..d).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let params = template
        .with_flat(&flat)
        .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    Ok(Checkpoint {
        step,
        epoch,
        params,
        config,
        fingerprint,
    })
}

/// Writes via a temporary file and rename.
pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    let io = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode_checkpoint(ckpt)).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn sample() -> Checkpoint {
        let params = NetParams::init(&[5, 4, 3], Activation::Relu, &mut rng::stream(3, "t")).unwrap();
        Checkpoint {
            step: 42,
            epoch: 2,
            params,
            config: TrainConfig::default(),
            fingerprint: [7; 32],
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let c = sample();
        let back = decode_checkpoint(&encode_checkpoint(&c)).unwrap();
        assert_eq!(back, c);
        let bits = |p: &NetParams| p.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.params), bits(&c.params));
    }

    #[test]
    fn truncation_is_a_checksum_error() {
        let bytes = encode_checkpoint(&sample());
        for cut in [bytes.len() - 1, bytes.len() / 2, 20, 12] {
            assert!(matches!(decode_checkpoint(&bytes[..cut]), Err(CheckpointError::Checksum)));
        }
    }

    #[test]
    fn newer_version_rejected_before_parsing() {
        let mut bytes = encode_checkpoint(&sample());
        bytes[8..12].copy_from_slice(&(CHECKPOINT_VERSION + 1).to_le_bytes());
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(CheckpointError::Version { found: 2, supported: 1 })
        ));
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_checkpoint(&sample());
        bytes[0] = b'X';
        assert!(matches!(decode_checkpoint(&bytes), Err(CheckpointError::BadMagic)));
    }

    #[test]
    fn nan_weights_survive_the_format() {
        let mut c = sample();
        c.params.weights[0][3] = f64::NAN;
        let back = decode_checkpoint(&encode_checkpoint(&c)).unwrap();
        assert!(back.params.weights[0][3].is_nan());
    }
}
