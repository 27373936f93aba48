//! `run_manifest.json`: what a run read, what it wrote and with which seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub inputs: Vec<InputFile>,
    pub seed: Option<u64>,
    pub version: String,
    /// Echo of the run's options (strategies, K, chain, ...).
    pub settings: BTreeMap<String, String>,
    /// Unix seconds.
    pub started: u64,
    pub finished: u64,
    pub outputs: Vec<String>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn start(subcommand: &str, seed: Option<u64>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            inputs: Vec::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            settings: BTreeMap::new(),
            started: now(),
            finished: 0,
            outputs: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.settings.insert(key.to_string(), value.to_string());
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.push(InputFile {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Stamp the finish time and write the manifest into `dir`; the
    /// manifest lists itself last.
    pub fn finish(mut self, dir: &Path, outputs: &[PathBuf]) -> CliResult<PathBuf> {
        let path = dir.join(RUN_MANIFEST_FILE);
        self.outputs = outputs.iter().chain([&path]).map(|p| p.display().to_string()).collect();
        self.finished = now();
        let text = serde_json::to_string_pretty(&self).expect("manifest serialises");
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
