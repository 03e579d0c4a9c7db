//! Holdout validation protocol and error-vs-degree analysis.
//!
//! Repeated random holdout: per split, a fixed number of observed entries
//! is removed, the space is refit on the remainder, and each held-out gap is
//! predicted as the latent distance between its model and task points.
//! Geometry comparisons reuse identical holdout memberships so the splits,
//! not the sampling, drive the differences.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::embedder::{fit, FitConfig};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, GeometryKind};
use crate::normalize::DeltaMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPlan {
    n_splits: usize,
    holdout_size: usize,
    seed: u64,
}

impl SplitPlan {
    pub fn new(n_splits: usize, holdout_size: usize, seed: u64) -> Result<Self> {
        if n_splits < 1 {
            return Err(Error::InvalidConfig("n_splits must be >= 1".into()));
        }
        if holdout_size < 1 {
            return Err(Error::InvalidConfig("holdout_size must be >= 1".into()));
        }
        Ok(Self { n_splits, holdout_size, seed })
    }

    pub fn n_splits(&self) -> usize {
        self.n_splits
    }

    pub fn holdout_size(&self) -> usize {
        self.holdout_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self { n_splits: 10, holdout_size: 10, seed: 42 }
    }
}

/// One held-out prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub split: usize,
    pub model: String,
    pub task: String,
    pub true_delta: f64,
    pub predicted_delta: f64,
    /// Number of training entries the model kept in this split.
    pub model_degree: usize,
}

/// A holdout slot that could not be filled or evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedSlot {
    pub split: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub geometry: Geometry,
    pub rows: Vec<PredictionRow>,
    pub skipped: Vec<SkippedSlot>,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    /// Pearson correlation between predicted and true gaps; undefined when
    /// either side has zero variance.
    pub pearson_r: Option<f64>,
}

impl EvalReport {
    fn from_rows(geometry: Geometry, rows: Vec<PredictionRow>, skipped: Vec<SkippedSlot>) -> Self {
        let n = rows.len() as f64;
        let (rmse, mae) = if rows.is_empty() {
            (None, None)
        } else {
            let sse: f64 = rows.iter().map(|r| (r.predicted_delta - r.true_delta).powi(2)).sum();
            let sae: f64 = rows.iter().map(|r| (r.predicted_delta - r.true_delta).abs()).sum();
            (Some((sse / n).sqrt()), Some(sae / n))
        };
        let pearson_r = pearson(
            rows.iter().map(|r| r.predicted_delta),
            rows.iter().map(|r| r.true_delta),
            rows.len(),
        );
        Self { geometry, rows, skipped, rmse, mae, pearson_r }
    }

    /// Raw rows as CSV: `model,task,true_delta,predicted_delta,degree`.
    pub fn export_rows_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["model", "task", "true_delta", "predicted_delta", "degree"])?;
        for r in &self.rows {
            w.write_record([
                r.model.as_str(),
                r.task.as_str(),
                &format!("{}", r.true_delta),
                &format!("{}", r.predicted_delta),
                &r.model_degree.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aggregates as a JSON value (keys sorted by serde_json's map).
    pub fn aggregates_value(&self) -> serde_json::Value {
        serde_json::json!({
            "geometry": self.geometry.kind.as_str(),
            "rows": self.rows.len(),
            "skipped": self.skipped.len(),
            "rmse": self.rmse,
            "mae": self.mae,
            "pearson_r": self.pearson_r,
        })
    }

    /// This report's rows as scatter points tagged with its geometry.
    pub fn scatter_rows(&self) -> Vec<ScatterRow> {
        self.rows
            .iter()
            .map(|r| ScatterRow {
                geometry: self.geometry.kind,
                true_delta: r.true_delta,
                predicted_delta: r.predicted_delta,
                model: r.model.clone(),
                task: r.task.clone(),
                degree: r.model_degree,
            })
            .collect()
    }
}

fn pearson(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>, n: usize) -> Option<f64> {
    if n < 2 {
        return None;
    }
    let pairs: Vec<(f64, f64)> = xs.zip(ys).collect();
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Holdout membership for one split, independent of geometry.
#[derive(Debug, Clone)]
struct SplitAssignment {
    holdout: Vec<(usize, usize)>,
    skipped: Vec<SkippedSlot>,
}

fn derive_seed(base: u64, stream: u64) -> u64 {
    base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Draw each split's holdout set. Entries are drawn without replacement in
/// shuffled order; a candidate whose removal would leave its model or task
/// with no training entry is rejected and the walk continues (the paper's
/// protocol never orphans a point). Unfillable slots are logged and skipped.
fn plan_assignments(delta: &DeltaMatrix, plan: &SplitPlan) -> Result<Vec<SplitAssignment>> {
    let available = delta.n_observed();
    if available <= plan.holdout_size {
        return Err(Error::CorpusTooSmall { needed: plan.holdout_size, available });
    }
    let all_entries: Vec<(usize, usize)> = delta.entries().keys().copied().collect();
    let base_model_deg: Vec<usize> =
        (0..delta.models().len()).map(|m| delta.model_degree(m)).collect();
    let base_task_deg: Vec<usize> =
        (0..delta.tasks().len()).map(|t| delta.task_degree(t)).collect();

    let mut assignments = Vec::with_capacity(plan.n_splits);
    for split in 0..plan.n_splits {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, split as u64 + 1));
        let mut shuffled = all_entries.clone();
        shuffled.shuffle(&mut rng);

        let mut model_deg = base_model_deg.clone();
        let mut task_deg = base_task_deg.clone();
        let mut holdout = Vec::with_capacity(plan.holdout_size);
        for &(m, t) in &shuffled {
            if holdout.len() == plan.holdout_size {
                break;
            }
            if model_deg[m] < 2 || task_deg[t] < 2 {
                log::debug!(
                    "split {split}: resampling holdout candidate ({m}, {t}); removal would orphan its model or task"
                );
                continue;
            }
            model_deg[m] -= 1;
            task_deg[t] -= 1;
            holdout.push((m, t));
        }
        let mut skipped = Vec::new();
        for _ in holdout.len()..plan.holdout_size {
            let reason = "no eligible holdout candidate left".to_string();
            log::warn!("split {split}: {reason}");
            skipped.push(SkippedSlot { split, reason });
        }
        assignments.push(SplitAssignment { holdout, skipped });
    }
    Ok(assignments)
}

fn run_assignments(
    delta: &DeltaMatrix,
    geometry: Geometry,
    assignments: &[SplitAssignment],
    config: &FitConfig,
) -> Result<EvalReport> {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (split, assignment) in assignments.iter().enumerate() {
        skipped.extend(assignment.skipped.iter().cloned());
        let training = delta.without_entries(&assignment.holdout);
        let split_config =
            FitConfig { seed: derive_seed(config.seed, split as u64 + 1), ..*config };
        let space = fit(&training, geometry, &split_config)?;
        for &(m, t) in &assignment.holdout {
            let model = delta.models()[m].label();
            let task = delta.tasks()[t].label();
            let predicted = geometry.distance(
                space.model_point(&model).expect("model fitted"),
                space.task_point(&task).expect("task fitted"),
            )?;
            rows.push(PredictionRow {
                split,
                model,
                task,
                true_delta: delta.entry(m, t).expect("held-out entry exists"),
                predicted_delta: predicted,
                model_degree: training.model_degree(m),
            });
        }
    }
    Ok(EvalReport::from_rows(geometry, rows, skipped))
}

/// Run the repeated-holdout protocol for one geometry.
pub fn run_splits(
    delta: &DeltaMatrix,
    geometry: Geometry,
    plan: &SplitPlan,
    config: &FitConfig,
) -> Result<EvalReport> {
    let assignments = plan_assignments(delta, plan)?;
    run_assignments(delta, geometry, &assignments, config)
}

/// Per-geometry evaluation over identical holdout memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryComparison {
    pub euclidean: EvalReport,
    pub cosine: EvalReport,
    pub poincare: EvalReport,
}

/// One point of the predicted-vs-true scatter.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub geometry: GeometryKind,
    pub true_delta: f64,
    pub predicted_delta: f64,
    pub model: String,
    pub task: String,
    pub degree: usize,
}

impl GeometryComparison {
    pub fn reports(&self) -> [(GeometryKind, &EvalReport); 3] {
        [
            (GeometryKind::Euclidean, &self.euclidean),
            (GeometryKind::Cosine, &self.cosine),
            (GeometryKind::Poincare, &self.poincare),
        ]
    }

    pub fn scatter_rows(&self) -> Vec<ScatterRow> {
        self.reports().iter().flat_map(|(_, report)| report.scatter_rows()).collect()
    }

    /// Scatter CSV: `geometry,true_delta,predicted_delta,model,task,degree`.
    pub fn export_scatter_csv<W: Write>(&self, writer: W) -> Result<()> {
        export_scatter(self.scatter_rows(), writer)
    }
}

pub fn export_scatter<W: Write>(rows: Vec<ScatterRow>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["geometry", "true_delta", "predicted_delta", "model", "task", "degree"])?;
    for r in rows {
        w.write_record([
            r.geometry.as_str(),
            &format!("{}", r.true_delta),
            &format!("{}", r.predicted_delta),
            r.model.as_str(),
            r.task.as_str(),
            &r.degree.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Run the protocol for all three geometries at the given dimension with
/// identical split memberships.
pub fn compare_geometries(
    delta: &DeltaMatrix,
    dim: usize,
    plan: &SplitPlan,
    config: &FitConfig,
) -> Result<GeometryComparison> {
    let assignments = plan_assignments(delta, plan)?;
    let run = |kind| -> Result<EvalReport> {
        run_assignments(delta, Geometry::new(kind, dim)?, &assignments, config)
    };
    Ok(GeometryComparison {
        euclidean: run(GeometryKind::Euclidean)?,
        cosine: run(GeometryKind::Cosine)?,
        poincare: run(GeometryKind::Poincare)?,
    })
}

/// Lower edges of the default training-degree buckets: 1-4, 5-9, 10-19, 20+.
pub const DEFAULT_DEGREE_BUCKET_EDGES: [usize; 4] = [1, 5, 10, 20];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeBucket {
    pub label: String,
    pub lo: usize,
    pub hi: Option<usize>,
    pub count: usize,
    pub mean_abs_error: Option<f64>,
    pub std_abs_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeErrorTable {
    pub buckets: Vec<DegreeBucket>,
    /// Raw (training degree, signed error) pairs for plotting.
    pub pairs: Vec<(usize, f64)>,
}

impl DegreeErrorTable {
    /// CSV: `bucket,count,mean_abs_error,std_abs_error`; empty statistics
    /// for empty buckets.
    pub fn export_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bucket", "count", "mean_abs_error", "std_abs_error"])?;
        for b in &self.buckets {
            w.write_record([
                b.label.as_str(),
                &b.count.to_string(),
                &b.mean_abs_error.map(|v| format!("{v}")).unwrap_or_default(),
                &b.std_abs_error.map(|v| format!("{v}")).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Bucket held-out prediction errors by the model's training degree.
/// Empty buckets are emitted with count 0 so the schema is stable.
pub fn error_by_degree(report: &EvalReport) -> DegreeErrorTable {
    error_by_degree_with_edges(report, &DEFAULT_DEGREE_BUCKET_EDGES)
        .expect("default edges are valid")
}

pub fn error_by_degree_with_edges(
    report: &EvalReport,
    edges: &[usize],
) -> Result<DegreeErrorTable> {
    if edges.is_empty() || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("bucket edges must be strictly ascending".into()));
    }
    let mut per_bucket: Vec<Vec<f64>> = vec![Vec::new(); edges.len()];
    let mut pairs = Vec::with_capacity(report.rows.len());
    for row in &report.rows {
        let error = row.predicted_delta - row.true_delta;
        pairs.push((row.model_degree, error));
        let bucket = edges.iter().rposition(|&lo| row.model_degree >= lo).unwrap_or(0);
        per_bucket[bucket].push(error.abs());
    }

    let buckets = edges
        .iter()
        .enumerate()
        .map(|(i, &lo)| {
            let hi = edges.get(i + 1).map(|&next| next - 1);
            let label = match hi {
                Some(hi) => format!("{lo}-{hi}"),
                None => format!("{lo}+"),
            };
            let values = &per_bucket[i];
            let (mean, std) = if values.is_empty() {
                (None, None)
            } else {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                (Some(mean), Some(var.sqrt()))
            };
            DegreeBucket {
                label,
                lo,
                hi,
                count: values.len(),
                mean_abs_error: mean,
                std_abs_error: std,
            }
        })
        .collect();
    Ok(DegreeErrorTable { buckets, pairs })
}

/// Assert-style helper used in tests: all split holdout sets of a report,
/// as (split, model, task) triples.
pub fn holdout_triples(report: &EvalReport) -> BTreeSet<(usize, String, String)> {
    report.rows.iter().map(|r| (r.split, r.model.clone(), r.task.clone())).collect()
}
