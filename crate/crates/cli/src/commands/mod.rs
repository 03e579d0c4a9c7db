pub mod analyze;
pub mod embed;
pub mod eval;
pub mod ingest;
pub mod place;
pub mod predict;

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use benchembed::{GeometryKind, TaskStats};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeometryArg {
    Euclidean,
    Cosine,
    Poincare,
}

impl From<GeometryArg> for GeometryKind {
    fn from(arg: GeometryArg) -> Self {
        match arg {
            GeometryArg::Euclidean => GeometryKind::Euclidean,
            GeometryArg::Cosine => GeometryKind::Cosine,
            GeometryArg::Poincare => GeometryKind::Poincare,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Model,
    Task,
}

/// Per-task normalization statistics written next to each embedding, so
/// raw-unit predictions and model placement need no re-ingestion.
#[derive(Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub tasks: BTreeMap<String, TaskStats>,
}

impl Sidecar {
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::util::read_to_string(path)
            .context("gap-statistics sidecar missing (it is written by the embed command)")?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }
}
