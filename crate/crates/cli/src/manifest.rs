//! Run manifest and checksummed artifact writer.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spde_core::experiments::Gate;

pub const SCHEMA: &str = "spde-manifest/1";
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Passed,
    GateFailed,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub cli: String,
    pub core: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub kind: String,
    pub versions: Versions,
    pub rng_protocol: String,
    pub seed: u64,
    pub threads: usize,
    /// SHA-256 of the effective config with output location and thread count removed.
    pub config_hash: String,
    /// Effective config as TOML, defaults included.
    pub config: String,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    /// False until every artifact has been written and checksummed.
    pub complete: bool,
    pub status: Status,
    pub error: Option<String>,
    pub files: Vec<FileEntry>,
    pub gates: Vec<Gate>,
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        let path = dir.join(MANIFEST_NAME);
        let tmp = dir.join(format!("{MANIFEST_NAME}.tmp"));
        fs::write(&tmp, text + "\n").with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &path).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    /// Accepts a manifest file or the directory that holds one.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let file = if path.is_dir() { path.join(MANIFEST_NAME) } else { path.to_path_buf() };
        let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
        let m: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))?;
        if m.schema != SCHEMA {
            bail!("{} has schema `{}`, expected `{SCHEMA}`", file.display(), m.schema);
        }
        let dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((m, dir))
    }

    /// Recomputes every listed checksum; returns one message per mismatch.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        let mut problems = Vec::new();
        for f in &self.files {
            match fs::read(dir.join(&f.path)) {
                Err(e) => problems.push(format!("{}: cannot read ({e})", f.path)),
                Ok(bytes) => {
                    if bytes.len() as u64 != f.bytes {
                        problems.push(format!("{}: {} bytes on disk, manifest says {}", f.path, bytes.len(), f.bytes));
                    } else if sha256_hex(&bytes) != f.sha256 {
                        problems.push(format!("{}: checksum mismatch", f.path));
                    }
                }
            }
        }
        problems
    }
}

/// The only route by which a run writes output files.
pub struct Artifacts {
    dir: PathBuf,
    pub files: Vec<FileEntry>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(FileEntry { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }
}
