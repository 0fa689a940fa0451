use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub rng_algorithm: String,
    pub threads: usize,
    pub wall_time_seconds: f64,
    /// File name to SHA-256 hex digest.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes output files into one directory and remembers their digests.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    digests: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), digests: BTreeMap::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.digests.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Finishes the run by writing `manifest.json` (not itself digested).
    pub fn finish(self, command: &str, config: RunConfig, threads: usize, wall: f64) -> Result<Manifest, CliError> {
        let m = Manifest {
            tool: "husimi-lab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            rng_algorithm: husimi_lab::rng::RNG_ALGORITHM.into(),
            threads,
            wall_time_seconds: wall,
            outputs: self.digests,
        };
        let mut text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        text.push('\n');
        fs::write(self.dir.join(MANIFEST_FILE), text)?;
        Ok(m)
    }
}

/// Recomputes every digest listed in a manifest; returns the names that differ.
pub fn verify(dir: &Path, manifest: &Manifest) -> Result<Vec<String>, CliError> {
    let mut bad = Vec::new();
    for (name, digest) in &manifest.outputs {
        let bytes = fs::read(dir.join(name))?;
        if &sha256_hex(&bytes) != digest {
            bad.push(name.clone());
        }
    }
    Ok(bad)
}
