use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use benchembed::{
    compare_geometries, error_by_degree, run_splits, DeltaMatrix, EvalReport, FitConfig, Geometry,
    GeometryKind, ResultsDb, SplitPlan,
};
use clap::{Args, ValueEnum};
use serde_json::json;

use crate::manifest::ManifestBuilder;
use crate::util::{read_to_string, write_file};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeometriesArg {
    All,
    Euclidean,
    Cosine,
    Poincare,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Canonical database CSV (output of the ingest command)
    #[arg(long)]
    pub db: PathBuf,
    /// Number of repeated holdout splits
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub splits: u64,
    /// Held-out entries per split
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub holdout: u64,
    #[arg(long, value_enum, default_value_t = GeometriesArg::All)]
    pub geometries: GeometriesArg,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: EvalArgs) -> Result<()> {
    let config = json!({
        "db": args.db.display().to_string(),
        "splits": args.splits,
        "holdout": args.holdout,
        "geometries": format!("{:?}", args.geometries).to_lowercase(),
        "seed": args.seed,
        "out": args.out.display().to_string(),
    });
    let mut manifest = ManifestBuilder::new("eval", config, Some(args.seed));
    manifest.add_input(&args.db)?;

    let db = ResultsDb::ingest_csv(&read_to_string(&args.db)?)?;
    ensure!(!db.is_empty(), "database contains no records: {}", args.db.display());
    ensure!(
        db.is_aggregated(),
        "database has duplicate (model, task) pairs; rerun ingest with --aggregate"
    );
    let delta = DeltaMatrix::normalize(&db)?;
    let plan = SplitPlan::new(args.splits as usize, args.holdout as usize, args.seed)?;
    let fit_config = FitConfig { seed: args.seed, ..FitConfig::default() };
    let dim = Geometry::DEFAULT_DIM;

    let reports: Vec<EvalReport> = match args.geometries {
        GeometriesArg::All => {
            let cmp = compare_geometries(&delta, dim, &plan, &fit_config)?;
            vec![cmp.euclidean, cmp.cosine, cmp.poincare]
        }
        single => {
            let kind = match single {
                GeometriesArg::Euclidean => GeometryKind::Euclidean,
                GeometriesArg::Cosine => GeometryKind::Cosine,
                GeometriesArg::Poincare => GeometryKind::Poincare,
                GeometriesArg::All => unreachable!(),
            };
            vec![run_splits(&delta, Geometry::new(kind, dim)?, &plan, &fit_config)?]
        }
    };

    let mut aggregates = serde_json::Map::new();
    let mut scatter_rows = Vec::new();
    let mut degree_csv = csv::Writer::from_writer(Vec::new());
    degree_csv.write_record(["geometry", "bucket", "count", "mean_abs_error", "std_abs_error"])?;
    for report in &reports {
        let kind = report.geometry.kind;
        println!(
            "{kind}: rmse={} mae={} pearson_r={} rows={} skipped={}",
            fmt_opt(report.rmse),
            fmt_opt(report.mae),
            fmt_opt(report.pearson_r),
            report.rows.len(),
            report.skipped.len()
        );
        let mut rows_buf = Vec::new();
        report.export_rows_csv(&mut rows_buf)?;
        write_file(&args.out.join(format!("eval_{kind}.csv")), &rows_buf)?;
        aggregates.insert(kind.as_str().to_string(), report.aggregates_value());
        scatter_rows.extend(report.scatter_rows());

        for bucket in error_by_degree(report).buckets {
            degree_csv.write_record([
                kind.as_str(),
                bucket.label.as_str(),
                &bucket.count.to_string(),
                &bucket.mean_abs_error.map(|v| format!("{v}")).unwrap_or_default(),
                &bucket.std_abs_error.map(|v| format!("{v}")).unwrap_or_default(),
            ])?;
        }
    }

    let aggregates_text =
        serde_json::to_string_pretty(&serde_json::Value::Object(aggregates))? + "\n";
    write_file(&args.out.join("aggregates.json"), aggregates_text.as_bytes())?;

    let mut scatter_buf = Vec::new();
    benchembed::evaluator::export_scatter(scatter_rows, &mut scatter_buf)?;
    write_file(&args.out.join("scatter.csv"), &scatter_buf)?;

    let degree_bytes = degree_csv.into_inner().context("flushing degree table")?;
    write_file(&args.out.join("degree_error.csv"), &degree_bytes)?;

    manifest.write(&args.out.join("manifest.json"))?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".to_string())
}
