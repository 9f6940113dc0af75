//! Run manifests: every artifact of a run directory is listed with its
//! SHA-256, the config is echoed verbatim, and nothing time-dependent is
//! recorded, so reruns are byte-identical.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_err, CliError};
use crate::market_data::fetch::atomic_write;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileEntry {
    /// path relative to the run directory
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// `backtest`, `theory`, or `ingest`
    pub kind: String,
    pub tool_version: String,
    pub seed: u64,
    /// verbatim config file contents (empty for configless commands)
    pub config_echo: String,
    pub files: Vec<FileEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Collects writes for a run directory and finalizes them into a manifest.
pub struct RunWriter {
    root: PathBuf,
    kind: String,
    seed: u64,
    config_echo: String,
    files: Vec<FileEntry>,
}

impl RunWriter {
    pub fn new(root: &Path, kind: &str, seed: u64, config_echo: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(io_err(root))?;
        Ok(Self {
            root: root.to_path_buf(),
            kind: kind.to_string(),
            seed,
            config_echo: config_echo.to_string(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Atomically writes one artifact (relative path) and records its hash.
    /// Returns true when the file changed (or is new).
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<bool, CliError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let hash = sha256_hex(bytes);
        let changed = match std::fs::read(&path) {
            Ok(existing) => sha256_hex(&existing) != hash,
            Err(_) => true,
        };
        if changed {
            atomic_write(&path, bytes).map_err(io_err(&path))?;
        }
        self.files.push(FileEntry {
            path: rel.to_string(),
            sha256: hash,
        });
        Ok(changed)
    }

    /// Writes `manifest.json` listing every recorded artifact.
    pub fn finalize(mut self) -> Result<Manifest, CliError> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            schema_version: 1,
            kind: self.kind.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config_echo: self.config_echo.clone(),
            files: self.files.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest)
            .expect("manifest serialization cannot fail");
        let path = self.root.join(MANIFEST_NAME);
        atomic_write(&path, text.as_bytes()).map_err(io_err(&path))?;
        Ok(manifest)
    }
}

/// Loads and verifies a manifest: every listed file must exist and hash to
/// its recorded digest.
pub fn load_verified(root: &Path) -> Result<Manifest, CliError> {
    let path = root.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&path)
        .map_err(|_| CliError::MissingRun(path.display().to_string()))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::MissingRun(format!("{}: {e}", path.display())))?;
    for f in &manifest.files {
        let p = root.join(&f.path);
        let bytes = std::fs::read(&p)
            .map_err(|_| CliError::MissingRun(format!("listed file missing: {}", f.path)))?;
        if sha256_hex(&bytes) != f.sha256 {
            return Err(CliError::MissingRun(format!(
                "checksum mismatch on {}",
                f.path
            )));
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_finalize_verify_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = RunWriter::new(dir.path(), "backtest", 7, "seed = 7\n").unwrap();
        assert!(w.write("a/one.csv", b"x,y\n1,2\n").unwrap());
        assert!(w.write("two.json", b"{}").unwrap());
        let m = w.finalize().unwrap();
        assert_eq!(m.files.len(), 2);
        assert_eq!(m.files[0].path, "a/one.csv"); // sorted
        let loaded = load_verified(dir.path()).unwrap();
        assert_eq!(loaded.seed, 7);
        assert_eq!(loaded.kind, "backtest");

        // unchanged rewrite is a no-op
        let mut w = RunWriter::new(dir.path(), "backtest", 7, "seed = 7\n").unwrap();
        assert!(!w.write("a/one.csv", b"x,y\n1,2\n").unwrap());

        // corruption is caught
        std::fs::write(dir.path().join("two.json"), b"{tampered}").unwrap();
        assert!(matches!(
            load_verified(dir.path()),
            Err(CliError::MissingRun(_))
        ));
    }

    #[test]
    fn missing_manifest_is_a_missing_run() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_verified(dir.path()),
            Err(CliError::MissingRun(_))
        ));
    }
}
