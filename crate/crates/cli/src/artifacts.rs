//! Output directory with atomic writes and a checksummed manifest.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

pub const MANIFEST: &str = "manifest.toml";
pub const MANIFEST_FORMAT: &str = "mech-wigner manifest v1";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'static str,
    workflow: &'a str,
    tool_version: &'static str,
    created_unix_s: u64,
    artifact: &'a [ArtifactEntry],
}

pub struct ArtifactDir {
    root: PathBuf,
    entries: Vec<ArtifactEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

impl ArtifactDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), entries: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        write_atomic(&self.root.join(name), bytes)?;
        self.entries.push(ArtifactEntry { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    /// Write the manifest last; it is the only file holding a timestamp.
    pub fn finish(self, workflow: &str) -> std::io::Result<PathBuf> {
        let created_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let manifest = Manifest {
            format: MANIFEST_FORMAT,
            workflow,
            tool_version: env!("CARGO_PKG_VERSION"),
            created_unix_s,
            artifact: &self.entries,
        };
        let path = self.root.join(MANIFEST);
        write_atomic(&path, toml::to_string(&manifest).expect("manifest serializes").as_bytes())?;
        Ok(path)
    }
}
