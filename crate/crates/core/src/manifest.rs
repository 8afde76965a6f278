//! Run manifests: every artifact directory records the exact inputs that
//! produced it, so deterministic runs are reproducible byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::Digest;

use crate::corpus::{hex_string, Mode};
use crate::error::{Error, Result};
use crate::sgns::Hyperparams;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub corpus_path: PathBuf,
    pub corpus_sha256: String,
    pub mode: Mode,
    pub hyperparams: Hyperparams,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(
        corpus_path: &Path,
        mode: Mode,
        hyperparams: Hyperparams,
        seeds: Vec<u64>,
        output_dir: &Path,
    ) -> Result<RunManifest> {
        Ok(RunManifest {
            corpus_path: corpus_path.to_path_buf(),
            corpus_sha256: file_sha256(corpus_path)?,
            mode,
            hyperparams,
            seeds,
            output_dir: output_dir.to_path_buf(),
            tool_version: TOOL_VERSION.to_string(),
        })
    }

    /// Hash identifying this manifest; referenced by every output file.
    pub fn hash(&self) -> String {
        let mut h = sha2::Sha256::new();
        h.update(serde_json::to_vec(self).unwrap());
        hex_string(&h.finalize())[..16].to_string()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).unwrap())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut h = sha2::Sha256::new();
    h.update(&bytes);
    Ok(hex_string(&h.finalize()))
}
