use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{ensure, Result};
use benchembed::{
    centrality, dataset_quality, project_2d, render_scatter, EmbeddingSpace, EntityKind,
    ProjectionMethod, ResultsDb, ScatterPoint,
};
use clap::Args;
use serde_json::json;

use crate::manifest::ManifestBuilder;
use crate::util::{read_to_string, write_file};

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Canonical database CSV (output of the ingest command)
    #[arg(long)]
    pub db: PathBuf,
    /// Embedding JSON (output of the embed command)
    #[arg(long)]
    pub embedding: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: AnalyzeArgs) -> Result<()> {
    let config = json!({
        "db": args.db.display().to_string(),
        "embedding": args.embedding.display().to_string(),
        "out": args.out.display().to_string(),
    });
    let mut manifest = ManifestBuilder::new("analyze", config, None);
    manifest.add_input(&args.db)?;
    manifest.add_input(&args.embedding)?;

    let db = ResultsDb::ingest_csv(&read_to_string(&args.db)?)?;
    ensure!(!db.is_empty(), "database contains no records: {}", args.db.display());
    let space = EmbeddingSpace::from_json(&read_to_string(&args.embedding)?)?;

    let quality = dataset_quality(&db)?;
    let mut quality_buf = Vec::new();
    benchembed::analysis::export_quality_csv(&quality, &mut quality_buf)?;

    let central = centrality(&space)?;
    let mut centrality_buf = Vec::new();
    benchembed::analysis::export_centrality_csv(&central, &mut centrality_buf)?;

    let projection = project_2d(&space, ProjectionMethod::Stress2d)?;
    println!("2d stress: {}", projection.stress);

    // color models by architecture family, tasks by metric
    let mut model_class: HashMap<String, String> = HashMap::new();
    let mut task_class: HashMap<String, String> = HashMap::new();
    for r in db.records() {
        model_class.entry(r.model.label()).or_insert_with(|| {
            r.arch_family.map(|a| a.to_string()).unwrap_or_else(|| "unknown".into())
        });
        task_class.entry(r.task.label()).or_insert_with(|| r.task.metric.clone());
    }
    let points: Vec<ScatterPoint> = projection
        .points
        .iter()
        .map(|p| ScatterPoint {
            label: p.label.clone(),
            kind: p.kind,
            x: p.x,
            y: p.y,
            class: match p.kind {
                EntityKind::Model => model_class.get(&p.label).cloned(),
                EntityKind::Task => task_class.get(&p.label).cloned(),
            }
            .unwrap_or_else(|| "unknown".into()),
        })
        .collect();

    let mut map_buf = Vec::new();
    benchembed::analysis::export_map_csv(&points, &mut map_buf)?;
    let svg = render_scatter(&points);

    write_file(&args.out.join("quality.csv"), &quality_buf)?;
    write_file(&args.out.join("centrality.csv"), &centrality_buf)?;
    write_file(&args.out.join("map.csv"), &map_buf)?;
    write_file(&args.out.join("map.svg"), svg.as_bytes())?;
    manifest.write(&args.out.join("manifest.json"))?;
    Ok(())
}
