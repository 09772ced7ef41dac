use std::fs;
use std::io;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Hyper, HyperError, QTriple};
use crate::product::ProductMdp;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint is for product {found}, this product is {expected}")]
    Fingerprint { found: String, expected: String },
    #[error("table sizes do not match the product")]
    Shape,
    #[error(transparent)]
    Hyper(HyperError),
}

/// Serialized trainer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub fingerprint: String,
    pub hyper: Hyper,
    pub horizon: usize,
    pub seed: u64,
    pub episode: usize,
    pub rng: ChaCha8Rng,
    pub q: QTriple,
    pub visits: Vec<u64>,
}

impl Checkpoint {
    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let json = serde_json::to_vec(self)?;
        fs::write(&tmp, json)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// SHA-256 of the product's canonical JSON dump, hex encoded.
pub fn product_fingerprint(p: &ProductMdp) -> String {
    let json = serde_json::to_vec(&p.dump()).expect("dump serializes");
    Sha256::digest(&json)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
