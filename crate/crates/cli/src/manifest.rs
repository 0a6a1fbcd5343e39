use crate::config::{Mode, RunConfig};
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    Ok(sha256_bytes(&fs::read(path)?))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl FileHash {
    pub fn of(path: &Path, recorded_as: PathBuf) -> Result<Self> {
        let bytes = fs::metadata(path).with_context(|| format!("hashing {}", path.display()))?.len();
        Ok(FileHash { path: recorded_as, sha256: sha256_file(path)?, bytes })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub program: String,
    pub version: String,
    pub command: Mode,
    pub seed: u64,
    pub resume: bool,
    /// The fully resolved configuration; usable as `--config`.
    pub config: RunConfig,
    /// Files read by the run (data, checkpoints, logs).
    pub inputs: Vec<FileHash>,
    /// Files written by the run, relative to the output directory.
    pub artifacts: Vec<FileHash>,
}

/// Files a command wrote, in the order written.
#[derive(Debug, Default)]
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
    inputs: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Artifacts { dir: dir.to_path_buf(), ..Default::default() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn record(&mut self, path: &Path) {
        if !self.files.iter().any(|f| f == path) {
            self.files.push(path.to_path_buf());
        }
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.record(&path);
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.write(name, text)
    }

    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|f| f == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn finish(self, command: Mode, config: &RunConfig, resume: bool) -> Result<Manifest> {
        let artifacts = self
            .files
            .iter()
            .map(|p| FileHash::of(p, p.strip_prefix(&self.dir).unwrap_or(p).to_path_buf()))
            .collect::<Result<Vec<_>>>()?;
        let inputs = self.inputs.iter().map(|p| FileHash::of(p, p.clone())).collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            program: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            seed: config.seed,
            resume,
            config: config.clone(),
            inputs,
            artifacts,
        };
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_vec_pretty(&manifest)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}
