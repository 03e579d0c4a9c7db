//! Run manifest: what ran, with which resolved configuration, over which
//! input bytes. One manifest per output location.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use crate::util::{sha256_hex, write_file};

pub struct ManifestBuilder {
    subcommand: &'static str,
    config: Value,
    inputs: BTreeMap<String, String>,
    seed: Option<u64>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(subcommand: &'static str, config: Value, seed: Option<u64>) -> Self {
        Self { subcommand, config, inputs: BTreeMap::new(), seed, started: Instant::now() }
    }

    /// Record the sha256 digest of one input file's raw bytes.
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading input {}", path.display()))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    /// Write the manifest JSON. Every field except `duration_seconds` is a
    /// pure function of the inputs and flags.
    pub fn write(&self, path: &Path) -> Result<()> {
        let manifest = json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "subcommand": self.subcommand,
            "config": self.config,
            "inputs": self.inputs,
            "seed": self.seed,
            "duration_seconds": self.started.elapsed().as_secs_f64(),
        });
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        write_file(path, text.as_bytes())
    }
}
