//! Versioned binary checkpoints.
//!
//! ```text
//! magic "EADCKPT\0" | version u32 | header length u64 | JSON header
//! | parameters f64 × n | scaler ranges f64 × 2(F + 1) | SHA-256 of all preceding bytes
//! ```
//!
//! Integers and floats are little-endian; floats are stored bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{write_atomic, FeatureMask, GroupKey};
use crate::error::{Error, Result};
use crate::rnn::{Architecture, CandidateTiming, ForecastModel};
use crate::training::{MinMaxScaler, Range};

const MAGIC: &[u8; 8] = b"EADCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

/// A trained model with everything needed to forecast from raw inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ForecastModel,
    pub scaler: MinMaxScaler,
    pub features: FeatureMask,
    pub lookback: usize,
    pub group: GroupKey,
    pub seed: u64,
    /// SHA-256 (hex) of the run configuration that produced the model.
    pub config_digest: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    arch: Architecture,
    timing: CandidateTiming,
    features: FeatureMask,
    lookback: usize,
    horizon: usize,
    group: GroupKey,
    seed: u64,
    config_digest: String,
    params: usize,
    scaler_ranges: usize,
}

impl Checkpoint {
    pub fn horizon(&self) -> usize {
        self.model.horizon()
    }

    /// Refuses a checkpoint trained for other inputs or outputs.
    pub fn ensure_compatible(&self, features: FeatureMask, lookback: usize, horizon: usize) -> Result<()> {
        let mut diffs = Vec::new();
        if self.features != features {
            diffs.push(format!("features {} vs requested {features}", self.features));
        }
        if self.lookback != lookback {
            diffs.push(format!("lookback {} vs requested {lookback}", self.lookback));
        }
        if self.horizon() != horizon {
            diffs.push(format!("horizon {} vs requested {horizon}", self.horizon()));
        }
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(Error::Checkpoint(format!(
                "incompatible checkpoint: {}",
                diffs.join("; ")
            )))
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let params = self.model.to_flat();
        let mut ranges: Vec<f64> = Vec::with_capacity(2 * (self.scaler.features.len() + 1));
        for r in self.scaler.features.iter().chain([&self.scaler.target]) {
            ranges.extend([r.min, r.max]);
        }
        let header = Header {
            version: CHECKPOINT_VERSION,
            arch: self.model.arch,
            timing: self.model.timing,
            features: self.features,
            lookback: self.lookback,
            horizon: self.horizon(),
            group: self.group,
            seed: self.seed,
            config_digest: self.config_digest.clone(),
            params: params.len(),
            scaler_ranges: ranges.len() / 2,
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(20 + json.len() + 8 * (params.len() + ranges.len()) + DIGEST_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for v in params.iter().chain(&ranges) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let reject = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < MAGIC.len() + 4 + 8 + DIGEST_LEN {
            return Err(reject("file too short to be a checkpoint"));
        }
        if &bytes[..8] != MAGIC {
            return Err(reject("not a checkpoint (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "version {version} is not supported (expected {CHECKPOINT_VERSION})"
            )));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(reject("digest mismatch: file is truncated or corrupted"));
        }
        let header_len = u64::from_le_bytes(body[12..20].try_into().expect("8 bytes")) as usize;
        let json = body
            .get(20..20usize.saturating_add(header_len))
            .ok_or_else(|| reject("header runs past end of file"))?;
        let h: Header = serde_json::from_slice(json).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        if h.version != version {
            return Err(reject("header version disagrees with file version"));
        }
        let payload = &body[20 + header_len..];
        let floats = h.params + 2 * h.scaler_ranges;
        if payload.len() != 8 * floats {
            return Err(Error::Checkpoint(format!(
                "payload holds {} bytes, header promises {}",
                payload.len(),
                8 * floats
            )));
        }
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if h.arch.input_dim != h.features.width() || h.arch.horizon != h.horizon {
            return Err(reject("header architecture disagrees with features or horizon"));
        }
        if h.scaler_ranges != h.features.width() + 1 {
            return Err(reject("scaler width disagrees with features"));
        }
        let mut model = ForecastModel::zeros(h.arch)?.with_timing(h.timing);
        model
            .set_flat(&values[..h.params])
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut ranges: Vec<Range> = values[h.params..]
            .chunks_exact(2)
            .map(|p| Range { min: p[0], max: p[1] })
            .collect();
        let target = ranges.pop().expect("at least one range");
        Ok(Checkpoint {
            model,
            scaler: MinMaxScaler {
                features: ranges,
                target,
            },
            features: h.features,
            lookback: h.lookback,
            group: h.group,
            seed: h.seed,
            config_digest: h.config_digest,
        })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_atomic(path, &ckpt.to_bytes()?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    Checkpoint::from_bytes(&bytes)
}
