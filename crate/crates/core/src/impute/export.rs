use std::fs;
use std::path::{Path, PathBuf};

use super::engine::ImputedSet;
use crate::error::{Error, Result};
use crate::io::write_dataset_path;
use crate::kv::{join, KvDoc};
use crate::mvn::ChainConfig;
use crate::strategy::ImputationStrategy;

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Parsed `manifest.txt` of an exported imputed set.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedManifest {
    pub strategy: ImputationStrategy,
    pub k: usize,
    pub seed: u64,
    pub chain: ChainConfig,
    pub draw_indices: Vec<usize>,
    pub deltas: Vec<f64>,
    pub files: Vec<String>,
}

pub fn imputation_file_name(k: usize) -> String {
    format!("imputation_{:03}.csv", k + 1)
}

/// Write `imputation_001.csv`, ... and `manifest.txt` into `dir`.
/// Returns the paths written, manifest last.
pub fn write_imputed_set(set: &ImputedSet, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(set.k() + 1);
    let mut files = Vec::with_capacity(set.k());
    for (k, c) in set.completions.iter().enumerate() {
        let name = imputation_file_name(k);
        let path = dir.join(&name);
        write_dataset_path(c, &path)?;
        written.push(path);
        files.push(name);
    }
    let mut doc = KvDoc::new();
    doc.set("strategy", set.strategy);
    doc.set("reference_arm", set.strategy.reference_arm.label());
    doc.set("k", set.k());
    doc.set("seed", set.seed);
    doc.set("burn_in", set.chain.burn_in);
    doc.set("thin", set.chain.thin);
    doc.set("draw_indices", join(&set.draw_indices));
    doc.set("deltas", join(&set.deltas));
    doc.set("files", files.join(", "));
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, doc.render())?;
    written.push(path);
    Ok(written)
}

pub fn read_manifest(path: &Path) -> Result<ImputedManifest> {
    let doc = KvDoc::parse(&fs::read_to_string(path)?)?;
    let strategy: ImputationStrategy = doc.require("strategy")?.parse()?;
    let k: usize = doc.require_value("k")?;
    let manifest = ImputedManifest {
        strategy,
        k,
        seed: doc.require_value("seed")?,
        chain: ChainConfig {
            burn_in: doc.require_value("burn_in")?,
            thin: doc.require_value("thin")?,
        },
        draw_indices: doc.list("draw_indices")?.unwrap_or_default(),
        deltas: doc.list("deltas")?.unwrap_or_default(),
        files: doc.list("files")?.unwrap_or_default(),
    };
    if manifest.files.len() != k {
        return Err(Error::Config(format!("manifest lists {} files for k = {k}", manifest.files.len())));
    }
    Ok(manifest)
}
