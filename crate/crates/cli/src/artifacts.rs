//! Declared inputs, staged outputs and the per-command run manifest.
//!
//! Outputs are held in memory until [`Run::commit`], which writes each one to
//! a temporary file in the output directory and renames it into place, so a
//! failed command leaves no partial files behind.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<FileRecord>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn record(path: String, bytes: &[u8]) -> FileRecord {
    FileRecord {
        path,
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
    }
}

pub struct Run {
    command: &'static str,
    out_dir: PathBuf,
    inputs: Vec<FileRecord>,
    outputs: Vec<(String, Vec<u8>)>,
}

impl Run {
    pub fn new(command: &'static str, out_dir: &Path) -> Self {
        Run {
            command,
            out_dir: out_dir.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn manifest_name(command: &str) -> String {
        format!("{command}.manifest.json")
    }

    /// Reads a declared input and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let name = path.display().to_string();
        if !self.inputs.iter().any(|r| r.path == name) {
            self.inputs.push(record(name, &bytes));
        }
        Ok(bytes)
    }

    pub fn read_input_text(&mut self, path: &Path) -> Result<String, CliError> {
        String::from_utf8(self.read_input(path)?)
            .map_err(|_| CliError::data(format!("{}: not valid UTF-8", path.display())))
    }

    /// Stages an output at `rel` (relative to the output directory).
    pub fn add_output(&mut self, rel: impl Into<String>, bytes: Vec<u8>) {
        let rel = rel.into();
        self.outputs.retain(|(p, _)| *p != rel);
        self.outputs.push((rel, bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, rel: impl Into<String>, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.add_output(rel, text);
        Ok(())
    }

    pub fn output(&self, rel: &str) -> Option<&[u8]> {
        self.outputs.iter().find(|(p, _)| p == rel).map(|(_, b)| b.as_slice())
    }

    /// Writes every staged output, then the manifest, each by atomic rename.
    pub fn commit(self, cfg: &RunConfig) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            tool: "vibetap".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.into(),
            seed: cfg.seed,
            config_hash: cfg.hash(),
            config: cfg
                .pairs()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            inputs: self.inputs,
            outputs: self.outputs.iter().map(|(p, b)| record(p.clone(), b)).collect(),
        };
        for (rel, bytes) in &self.outputs {
            write_atomic(&self.out_dir.join(rel), bytes)?;
        }
        let mut text = serde_json::to_vec_pretty(&manifest)?;
        text.push(b'\n');
        write_atomic(&self.out_dir.join(Run::manifest_name(self.command)), &text)?;
        Ok(manifest)
    }
}

/// Writes `bytes` to a temporary sibling of `path` and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Data(e.error.into()))?;
    Ok(())
}
