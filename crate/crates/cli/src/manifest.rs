//! Per-run manifest: the config, its hash, the seeds and a checksum of
//! every file the pipeline wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT: &str = "bubblecast-manifest";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    /// Hash of the config of the latest command run on this directory.
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub data_hash: String,
    /// Set once models are trained.
    #[serde(default)]
    pub model_hash: Option<String>,
    /// The run seed and the seeds derived from it.
    pub seeds: BTreeMap<String, u64>,
    /// Relative path to SHA-256 hex digest.
    pub files: BTreeMap<String, String>,
    #[serde(default)]
    pub flags: BTreeMap<String, bool>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            config_hash: config.hash(),
            config: config.clone(),
            data_hash: config.data_hash(),
            model_hash: None,
            seeds: BTreeMap::new(),
            files: BTreeMap::new(),
            flags: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn path(dir: &Path) -> PathBuf {
        dir.join(MANIFEST_FILE)
    }

    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = Self::path(dir);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Data(format!("{}: {e}; run `bubblecast simulate` first", path.display())))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if m.format != FORMAT || m.version != VERSION {
            return Err(CliError::Data(format!("{}: unsupported manifest {} v{}", path.display(), m.format, m.version)));
        }
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> CliResult<()> {
        std::fs::write(Self::path(dir), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Hashes `dir/rel` and records it.
    pub fn record(&mut self, dir: &Path, rel: &str) -> CliResult<()> {
        let digest = sha256_file(&dir.join(rel))?;
        self.files.insert(rel.to_string(), digest);
        Ok(())
    }

    /// Resolves `dir/rel` after checking it against its recorded digest.
    pub fn verified(&self, dir: &Path, rel: &str) -> CliResult<PathBuf> {
        let path = dir.join(rel);
        let expected = self.files.get(rel).ok_or_else(|| CliError::Data(format!("{rel} is not listed in the manifest")))?;
        let actual = sha256_file(&path)?;
        if &actual != expected {
            return Err(CliError::Data(format!("checksum mismatch for {}: manifest {expected}, file {actual}", path.display())));
        }
        Ok(path)
    }

    pub fn has(&self, rel: &str) -> bool {
        self.files.contains_key(rel)
    }

    pub fn warn(&mut self, message: String) {
        eprintln!("warning: {message}");
        if !self.warnings.contains(&message) {
            self.warnings.push(message);
        }
    }

    pub fn flag(&mut self, name: &str, value: bool) {
        self.flags.insert(name.to_string(), value);
    }
}
