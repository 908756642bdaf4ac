use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub kind: String,
    /// Relative to the run directory.
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one run, written after every artifact it lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub verb: String,
    pub config_hash: String,
    pub seed: u64,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

impl RunManifest {
    pub fn new(verb: &str, config_hash: &str, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            verb: verb.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            artifacts: Vec::new(),
        }
    }

    /// Hashes `dir/rel` and records it.
    pub fn add(&mut self, dir: &Path, kind: &str, rel: impl Into<PathBuf>) -> Result<()> {
        let path = rel.into();
        let sha256 = sha256_file(&dir.join(&path))?;
        self.artifacts.retain(|a| a.path != path);
        self.artifacts.push(Artifact {
            kind: kind.to_string(),
            path,
            sha256,
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        fs::write(&tmp, text + "\n")?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))
    }

    /// Checks that every listed file exists with the recorded digest.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for a in &self.artifacts {
            let p = dir.join(&a.path);
            if !p.exists() {
                return Err(Error::Format(format!("artifact {} is missing", a.path.display())));
            }
            if sha256_file(&p)? != a.sha256 {
                return Err(Error::Format(format!(
                    "artifact {} does not match its hash",
                    a.path.display()
                )));
            }
        }
        Ok(())
    }
}
