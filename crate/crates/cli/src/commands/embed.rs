use std::path::PathBuf;

use anyhow::{ensure, Result};
use benchembed::{fit, DeltaMatrix, FitConfig, Geometry, ResultsDb};
use clap::Args;
use serde_json::json;

use super::{GeometryArg, Sidecar};
use crate::manifest::ManifestBuilder;
use crate::util::{read_to_string, sibling, write_file};

#[derive(Args)]
pub struct EmbedArgs {
    /// Canonical database CSV (output of the ingest command)
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long, value_enum, default_value_t = GeometryArg::Euclidean)]
    pub geometry: GeometryArg,
    /// Embedding dimension
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Where to write the embedding JSON
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: EmbedArgs) -> Result<()> {
    let config = json!({
        "db": args.db.display().to_string(),
        "geometry": format!("{:?}", args.geometry).to_lowercase(),
        "dim": args.dim,
        "seed": args.seed,
        "out": args.out.display().to_string(),
    });
    let mut manifest = ManifestBuilder::new("embed", config, Some(args.seed));
    manifest.add_input(&args.db)?;

    let db = ResultsDb::ingest_csv(&read_to_string(&args.db)?)?;
    ensure!(!db.is_empty(), "database contains no records: {}", args.db.display());
    ensure!(
        db.is_aggregated(),
        "database has duplicate (model, task) pairs; rerun ingest with --aggregate"
    );

    let delta = DeltaMatrix::normalize(&db)?;
    let geometry = Geometry::new(args.geometry.into(), args.dim as usize)?;
    let fit_config = FitConfig { seed: args.seed, ..FitConfig::default() };
    let space = fit(&delta, geometry, &fit_config)?;
    let report = space.fit_report();
    println!("loss: {}", report.final_loss);
    println!("iterations: {} (converged: {})", report.iterations, report.converged);

    let sidecar = Sidecar {
        tasks: delta
            .tasks()
            .iter()
            .zip(delta.task_stats())
            .map(|(task, stats)| (task.label(), stats.clone()))
            .collect(),
    };

    write_file(&args.out, space.to_json()?.as_bytes())?;
    write_file(&sibling(&args.out, "delta.json"), sidecar.to_json()?.as_bytes())?;
    manifest.write(&sibling(&args.out, "manifest.json"))?;
    Ok(())
}
