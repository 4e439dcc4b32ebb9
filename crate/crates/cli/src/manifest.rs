//! Run manifests: a config hash plus SHA-256 checksums of every artifact,
//! written last so a run can be verified byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Hash a serializable config via its canonical JSON encoding.
pub fn config_hash<T: Serialize>(config: &T) -> std::io::Result<String> {
    let json = serde_json::to_vec(config)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    Ok(sha256_hex(&json))
}

/// Checksum the named artifacts in `dir` and write `manifest.json`.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    seed: u64,
    config_hash: String,
    artifact_names: &[&str],
) -> std::io::Result<()> {
    let mut artifacts = BTreeMap::new();
    for name in artifact_names {
        let bytes = fs::read(dir.join(name))?;
        artifacts.insert(name.to_string(), sha256_hex(&bytes));
    }
    let manifest = Manifest {
        command: command.to_string(),
        seed,
        config_hash,
        artifacts,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    fs::write(dir.join("manifest.json"), json + "\n")
}
