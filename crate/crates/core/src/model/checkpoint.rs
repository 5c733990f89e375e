//! Binary checkpoint container.
//!
//! Layout: the 8-byte magic `PTRPARSE`, a little-endian `u32` format
//! version, a little-endian `u64` header length, a UTF-8 JSON header
//! (version, config, vocabulary, tensor directory), then every tensor as
//! row-major little-endian `f64` in directory order.

use std::fs;
use std::io;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Model, ModelConfig, ModelParams, Vocabulary};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PTRPARSE";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("truncated checkpoint")]
    Truncated,
    #[error("bad checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("tensor {name}: {message}")]
    Tensor { name: String, message: String },
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    config: ModelConfig,
    vocab: Vocabulary,
    tensors: Vec<TensorEntry>,
}

impl Model {
    pub fn to_bytes(&self) -> Vec<u8> {
        let tensors = self.params.tensors();
        let header = Header {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            tensors: tensors
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    rows: t.nrows(),
                    cols: t.ncols(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let scalars: usize = tensors.iter().map(|(_, t)| t.len()).sum();
        let mut out = Vec::with_capacity(20 + json.len() + 8 * scalars);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &tensors {
            for &x in t.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 20 {
            return Err(CheckpointError::Truncated);
        }
        if &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(20..20 + header_len).ok_or(CheckpointError::Truncated)?;
        let header: Header = serde_json::from_slice(body)?;
        if header.version != version {
            return Err(CheckpointError::Version(header.version));
        }

        // Shapes come from config and vocabulary; the directory must agree.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut params = ModelParams::init(&header.config, &header.vocab, &mut rng);
        let slots = params.tensors_mut();
        if slots.len() != header.tensors.len() {
            return Err(CheckpointError::Tensor {
                name: "*".into(),
                message: format!("expected {} tensors, found {}", slots.len(), header.tensors.len()),
            });
        }
        let mut at = 20 + header_len;
        for ((name, slot), entry) in slots.into_iter().zip(&header.tensors) {
            if name != entry.name || slot.dim() != (entry.rows, entry.cols) {
                return Err(CheckpointError::Tensor {
                    name: entry.name.clone(),
                    message: format!(
                        "expected {} of shape {:?}, found {}x{}",
                        name,
                        slot.dim(),
                        entry.rows,
                        entry.cols
                    ),
                });
            }
            let len = entry.rows * entry.cols * 8;
            let raw = bytes.get(at..at + len).ok_or(CheckpointError::Truncated)?;
            let values: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            *slot = Array2::from_shape_vec((entry.rows, entry.cols), values).expect("shape checked");
            at += len;
        }
        if at != bytes.len() {
            return Err(CheckpointError::Tensor {
                name: "*".into(),
                message: format!("{} trailing bytes", bytes.len() - at),
            });
        }
        Ok(Model {
            config: header.config,
            vocab: header.vocab,
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        Model::from_bytes(&fs::read(path)?)
    }
}
