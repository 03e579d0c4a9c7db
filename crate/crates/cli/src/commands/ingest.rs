use std::path::PathBuf;

use anyhow::{ensure, Result};
use benchembed::ResultsDb;
use clap::Args;
use serde_json::json;

use super::FormatArg;
use crate::manifest::ManifestBuilder;
use crate::util::{db_counts, read_to_string, sibling, write_file};

#[derive(Args)]
pub struct IngestArgs {
    /// Results file to ingest
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Collapse duplicate (model, task) pairs to the highest reported value
    #[arg(long)]
    pub aggregate: bool,
    /// Iteratively drop models and tasks with fewer results than this (0 disables)
    #[arg(long, default_value_t = 0)]
    pub min_degree: u64,
    /// Where to write the canonical CSV
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: IngestArgs) -> Result<()> {
    let config = json!({
        "input": args.input.display().to_string(),
        "format": format!("{:?}", args.format).to_lowercase(),
        "aggregate": args.aggregate,
        "min_degree": args.min_degree,
        "out": args.out.display().to_string(),
    });
    let mut manifest = ManifestBuilder::new("ingest", config, None);
    manifest.add_input(&args.input)?;

    let content = read_to_string(&args.input)?;
    let db = match args.format {
        FormatArg::Csv => ResultsDb::ingest_csv(&content)?,
        FormatArg::Json => ResultsDb::ingest_json(&content)?,
    };
    ensure!(!db.is_empty(), "input contains no records: {}", args.input.display());
    println!("ingested: {}", db_counts(&db));

    let db = if args.aggregate {
        let aggregated = db.aggregate_max();
        println!("aggregated: {}", db_counts(&aggregated));
        aggregated
    } else {
        db
    };

    let db = if args.min_degree > 0 {
        let filtered = db.filter_min_degree(args.min_degree as usize, args.min_degree as usize);
        println!("filtered (min degree {}): {}", args.min_degree, db_counts(&filtered));
        filtered
    } else {
        db
    };
    if db.is_empty() {
        log::warn!("result is empty; writing a header-only database");
    }

    let mut buf = Vec::new();
    db.export_csv(&mut buf)?;
    write_file(&args.out, &buf)?;
    manifest.write(&sibling(&args.out, "manifest.json"))?;
    Ok(())
}
