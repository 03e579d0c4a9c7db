use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, ensure, Context, Result};
use benchembed::{place_entity, EmbeddingSpace, EntityKind, FitConfig, TaskKey};
use clap::Args;
use serde_json::json;

use super::{KindArg, Sidecar};
use crate::manifest::ManifestBuilder;
use crate::util::{read_to_string, sibling, write_file};

#[derive(Args)]
pub struct PlaceArgs {
    /// Embedding JSON to place into (left untouched)
    #[arg(long)]
    pub embedding: PathBuf,
    /// Whether the new entity is a model or a task
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Label for the new entity
    #[arg(long)]
    pub name: String,
    /// CSV of the entity's known results. For a model: dataset,fraction,metric,value.
    /// For a task: method,backbone,value.
    #[arg(long)]
    pub results: PathBuf,
    /// Where to write the updated embedding JSON
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: PlaceArgs) -> Result<()> {
    let config = json!({
        "embedding": args.embedding.display().to_string(),
        "kind": format!("{:?}", args.kind).to_lowercase(),
        "name": args.name,
        "results": args.results.display().to_string(),
        "out": args.out.display().to_string(),
    });
    let mut manifest = ManifestBuilder::new("place", config, None);
    manifest.add_input(&args.embedding)?;
    manifest.add_input(&args.results)?;

    let space = EmbeddingSpace::from_json(&read_to_string(&args.embedding)?)?;
    let results_csv = read_to_string(&args.results)?;
    let (kind, known) = match args.kind {
        KindArg::Model => {
            let sidecar = Sidecar::load(&sibling(&args.embedding, "delta.json"))?;
            (EntityKind::Model, model_targets(&results_csv, &space, &sidecar)?)
        }
        KindArg::Task => (EntityKind::Task, task_targets(&results_csv, &space)?),
    };
    ensure!(!known.is_empty(), "results file {} has no data rows", args.results.display());
    if known.len() < 5 {
        log::warn!("low degree: {}", known.len());
    }

    let placed = place_entity(&space, kind, &known, &FitConfig::default())?;
    let updated = space.with_added_point(kind, &args.name, placed.coords.clone())?;
    println!(
        "placed {} '{}' from {} known results; residual loss {}",
        kind,
        args.name,
        known.len(),
        placed.loss
    );

    // predicted gaps for every opposite-kind entity not in the known set
    let opposite = match kind {
        EntityKind::Model => updated.task_points(),
        EntityKind::Task => updated.model_points(),
    };
    let mut predictions = csv::Writer::from_writer(Vec::new());
    predictions.write_record(["label", "delta_hat"])?;
    for (label, point) in opposite {
        if known.contains_key(label) {
            continue;
        }
        let d = updated.geometry().distance(&placed.coords, point)?;
        predictions.write_record([label.as_str(), &format!("{d}")])?;
    }
    let prediction_bytes = predictions.into_inner().context("flushing predictions")?;

    write_file(&args.out, updated.to_json()?.as_bytes())?;
    write_file(&sibling(&args.out, "predictions.csv"), &prediction_bytes)?;
    manifest.write(&sibling(&args.out, "manifest.json"))?;
    Ok(())
}

/// Parse a new model's results (`dataset,fraction,metric,value`) and
/// normalize each against the stored per-task statistics. Duplicate task
/// rows keep the highest value, mirroring corpus aggregation.
fn model_targets(
    data: &str,
    space: &EmbeddingSpace,
    sidecar: &Sidecar,
) -> Result<BTreeMap<String, f64>> {
    let mut raw: BTreeMap<String, f64> = BTreeMap::new();
    for (row_no, row) in read_rows(data, &["dataset", "fraction", "metric", "value"])? {
        let fraction = if row[1].is_empty() {
            100.0
        } else {
            row[1].parse::<f64>().map_err(|_| anyhow!("row {row_no}: non-numeric fraction"))?
        };
        let value: f64 = row[3].parse().map_err(|_| anyhow!("row {row_no}: non-numeric value"))?;
        let task = TaskKey::new(row[0].clone(), fraction, row[2].clone())
            .map_err(|e| anyhow!("row {row_no}: {e}"))?;
        let label = task.label();
        ensure!(space.task_point(&label).is_some(), "unknown task label '{label}' (row {row_no})");
        let slot = raw.entry(label).or_insert(f64::NEG_INFINITY);
        *slot = slot.max(value);
    }

    let mut targets = BTreeMap::new();
    for (label, value) in raw {
        let stats = sidecar
            .tasks
            .get(&label)
            .ok_or_else(|| anyhow!("task '{label}' missing from the gap-statistics sidecar"))?;
        if stats.degenerate {
            bail!("cannot normalize against zero-spread task '{label}'");
        }
        let target = (stats.best_value - value) / stats.max_delta;
        if !(0.0..=1.0).contains(&target) {
            log::warn!(
                "result on '{label}' normalizes to {target}, outside the observed [0, 1] range"
            );
        }
        targets.insert(label, target);
    }
    Ok(targets)
}

/// Parse a new task's results (`method,backbone,value`) and normalize them
/// within the file: the best value anchors gap 0, the worst anchors gap 1.
fn task_targets(data: &str, space: &EmbeddingSpace) -> Result<BTreeMap<String, f64>> {
    let mut raw: BTreeMap<String, f64> = BTreeMap::new();
    for (row_no, row) in read_rows(data, &["method", "backbone", "value"])? {
        ensure!(!row[0].is_empty(), "row {row_no}: missing method");
        let label =
            if row[1].is_empty() { row[0].clone() } else { format!("{} {}", row[0], row[1]) };
        let value: f64 = row[2].parse().map_err(|_| anyhow!("row {row_no}: non-numeric value"))?;
        ensure!(
            space.model_point(&label).is_some(),
            "unknown model label '{label}' (row {row_no})"
        );
        let slot = raw.entry(label).or_insert(f64::NEG_INFINITY);
        *slot = slot.max(value);
    }
    if raw.is_empty() {
        return Ok(BTreeMap::new());
    }

    let best = raw.values().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let max_delta = raw.values().fold(0.0f64, |a, &b| a.max(best - b));
    if max_delta == 0.0 {
        log::warn!("all provided values are equal; every gap target is 0");
    }
    Ok(raw
        .into_iter()
        .map(|(label, value)| {
            let target = if max_delta == 0.0 { 0.0 } else { (best - value) / max_delta };
            (label, target)
        })
        .collect())
}

/// Read a headered CSV, returning (1-based data row number, named fields).
fn read_rows(data: &str, columns: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(data.as_bytes());
    let headers = reader.headers()?.clone();
    let index: Vec<usize> = columns
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| anyhow!("missing column '{name}' in results file header"))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let fields =
            index.iter().map(|&col| record.get(col).unwrap_or_default().to_string()).collect();
        rows.push((i + 1, fields));
    }
    Ok(rows)
}
