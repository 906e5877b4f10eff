use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::pipeline::PIPELINE_FORMAT_VERSION;
use crate::trees::MODEL_FORMAT_VERSION;

/// Provenance record written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// SHA-256 of the effective configuration as compact JSON.
    pub config_digest: String,
    /// Input path to SHA-256 of its bytes.
    pub input_digests: BTreeMap<String, String>,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    /// Output path to SHA-256 of its bytes.
    pub outputs: BTreeMap<String, String>,
}

/// Collects input and output digests while a subcommand runs.
pub struct Run {
    subcommand: &'static str,
    out_dir: PathBuf,
    config_digest: String,
    seed: u64,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl Run {
    pub fn new(subcommand: &'static str, out_dir: PathBuf) -> Self {
        Run {
            subcommand,
            out_dir,
            config_digest: sha256_hex(b"null"),
            seed: 0,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn set_config<T: Serialize>(&mut self, config: &T, seed: u64) -> Result<()> {
        self.config_digest = sha256_hex(serde_json::to_string(config)?.as_bytes());
        self.seed = seed;
        Ok(())
    }

    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    pub fn read_string(&mut self, path: &Path) -> Result<String> {
        String::from_utf8(self.read(path)?).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))?;
        let path = self.out_dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.insert(path.display().to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn finish(self) -> Result<RunManifest> {
        let versions = BTreeMap::from([
            ("wqscreen".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("model_format".to_string(), MODEL_FORMAT_VERSION.to_string()),
            ("pipeline_format".to_string(), PIPELINE_FORMAT_VERSION.to_string()),
        ]);
        let manifest = RunManifest {
            subcommand: self.subcommand.to_string(),
            config_digest: self.config_digest,
            input_digests: self.inputs,
            seed: self.seed,
            versions,
            outputs: self.outputs,
        };
        fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(format!("{}_manifest.json", self.subcommand));
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}
