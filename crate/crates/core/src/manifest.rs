//! Per-run record of what was asked for and what was produced.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub threads: usize,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_clock_s: f64,
    pub config: RunConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_file(path: &Path) -> Result<FileDigest> {
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&std::fs::read(path)?),
    })
}

/// Collects inputs and outputs while a command runs.
#[derive(Debug)]
pub struct ManifestBuilder {
    started: Instant,
    command_line: Vec<String>,
    threads: usize,
    seeds: Vec<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(command_line: Vec<String>, threads: usize) -> Self {
        Self {
            started: Instant::now(),
            command_line,
            threads,
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, seed: u64) {
        if !self.seeds.contains(&seed) {
            self.seeds.push(seed);
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Digests every recorded file and writes the manifest as TOML.
    pub fn finish(self, config: &RunConfig, path: &Path) -> Result<RunManifest> {
        let digest_all = |paths: &[PathBuf]| paths.iter().map(|p| digest_file(p)).collect::<Result<Vec<_>>>();
        let manifest = RunManifest {
            command_line: self.command_line,
            threads: self.threads,
            seeds: self.seeds,
            inputs: digest_all(&self.inputs)?,
            outputs: digest_all(&self.outputs)?,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
            config: config.clone(),
        };
        let text = toml::to_string(&manifest).map_err(|e| crate::Error::Format(e.to_string()))?;
        crate::fsutil::write_bytes_atomic(path, text.as_bytes())?;
        Ok(manifest)
    }
}
