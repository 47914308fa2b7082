//! Run manifests: the command, its configuration and content hashes of
//! every input and output.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

pub const DIR_MANIFEST: &str = "run.json";

#[derive(Debug, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Hashes a file, or every file under a directory in path order. Run
/// manifests inside directories are skipped.
pub fn hash_path(path: &Path) -> Result<Vec<FileHash>> {
    if path.is_file() {
        return Ok(vec![FileHash { path: path.display().to_string(), sha256: sha256_file(path)? }]);
    }
    let mut out = Vec::new();
    for entry in WalkDir::new(path).sort_by_file_name() {
        let entry = entry?;
        if !entry.file_type().is_file() || entry.file_name() == DIR_MANIFEST {
            continue;
        }
        out.push(FileHash { path: entry.path().display().to_string(), sha256: sha256_file(entry.path())? });
    }
    Ok(out)
}

/// Where the manifest for `output` goes: `<dir>/run.json` for directories,
/// `<file>.run.json` next to files.
pub fn manifest_path(output: &Path) -> PathBuf {
    if output.is_dir() {
        output.join(DIR_MANIFEST)
    } else {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".run.json");
        output.with_file_name(name)
    }
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.extend(hash_path(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.extend(hash_path(path)?);
        Ok(())
    }

    /// Writes the manifest next to the first of `outputs`.
    pub fn write(mut self, outputs: &[&Path]) -> Result<()> {
        for p in outputs {
            self.output(p)?;
        }
        let Some(first) = outputs.first() else { return Ok(()) };
        let path = manifest_path(first);
        let mut bytes = serde_json::to_vec_pretty(&self)?;
        bytes.push(b'\n');
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }
}
