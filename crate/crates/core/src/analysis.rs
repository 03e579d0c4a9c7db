//! Corpus diagnostics, model centrality, and deterministic 2D map export.
//!
//! The 2D map replaces a stochastic neighbor-embedding display with two
//! deterministic projections: a stress-minimizing re-embedding of the
//! latent distances into the Euclidean plane (initialized from PCA, so its
//! stress never exceeds PCA's), and plain PCA as the fallback.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::embedder::{minimize, Constraint, EmbeddingSpace, EntityKind, FitConfig};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::results::{metric_is_bounded, ResultsDb, TaskKey};

/// Cutoffs deciding when a task counts as saturated: mean near the metric
/// ceiling with little spread across methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationThresholds {
    pub mu_min: f64,
    pub sigma_max: f64,
}

impl Default for SaturationThresholds {
    fn default() -> Self {
        Self { mu_min: 95.0, sigma_max: 1.5 }
    }
}

/// Spread and level of the raw values observed on one task.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityRow {
    pub task: TaskKey,
    /// Population standard deviation (divide by n).
    pub sigma: f64,
    pub mu: f64,
    pub n: usize,
    pub saturated: bool,
}

/// Per-task mean and population standard deviation of the raw values,
/// sorted by sigma descending. High spread means the task discriminates
/// between methods; a saturated task tells you little.
pub fn dataset_quality(db: &ResultsDb) -> Result<Vec<QualityRow>> {
    dataset_quality_with(db, SaturationThresholds::default())
}

pub fn dataset_quality_with(
    db: &ResultsDb,
    thresholds: SaturationThresholds,
) -> Result<Vec<QualityRow>> {
    if !db.is_aggregated() {
        return Err(Error::NotAggregated);
    }
    let mut order: Vec<TaskKey> = Vec::new();
    let mut values: BTreeMap<TaskKey, Vec<f64>> = BTreeMap::new();
    for r in db.records() {
        let slot = values.entry(r.task.clone()).or_insert_with(|| {
            order.push(r.task.clone());
            Vec::new()
        });
        slot.push(r.value);
    }
    let mut rows: Vec<QualityRow> = order
        .into_iter()
        .map(|task| {
            let vs = &values[&task];
            let (mu, sigma) = welford(vs);
            let saturated = metric_is_bounded(&task.metric)
                && mu >= thresholds.mu_min
                && sigma <= thresholds.sigma_max;
            QualityRow { sigma, mu, n: vs.len(), saturated, task }
        })
        .collect();
    rows.sort_by(|a, b| b.sigma.total_cmp(&a.sigma).then_with(|| a.task.cmp(&b.task)));
    Ok(rows)
}

/// Streaming mean and population standard deviation.
fn welford(values: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    (mean, (m2 / values.len() as f64).sqrt())
}

pub fn export_quality_csv<W: Write>(rows: &[QualityRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["task", "sigma", "mu", "n", "saturated"])?;
    for r in rows {
        w.write_record([
            r.task.label().as_str(),
            &format!("{}", r.sigma),
            &format!("{}", r.mu),
            &r.n.to_string(),
            &r.saturated.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A model's mean latent distance to every task point. Low centrality means
/// the model sits close to all tasks at once: broadly strong.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityRow {
    pub model: String,
    pub centrality: f64,
    pub rank: usize,
}

/// Mean distance from each model point to all task points (observed or
/// not), ranked ascending; ties break by label.
pub fn centrality(space: &EmbeddingSpace) -> Result<Vec<CentralityRow>> {
    let tasks = space.task_points();
    if tasks.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, actual: 0 });
    }
    let n_tasks = tasks.len() as f64;
    let mut rows: Vec<CentralityRow> = space
        .model_points()
        .iter()
        .map(|(label, point)| {
            let mut total = 0.0;
            for task_point in tasks.values() {
                total += space.geometry().distance(point, task_point)?;
            }
            Ok(CentralityRow { model: label.clone(), centrality: total / n_tasks, rank: 0 })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.centrality.total_cmp(&b.centrality).then_with(|| a.model.cmp(&b.model)));
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank = i + 1;
    }
    Ok(rows)
}

pub fn export_centrality_csv<W: Write>(rows: &[CentralityRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["model", "centrality", "rank"])?;
    for r in rows {
        w.write_record([r.model.as_str(), &format!("{}", r.centrality), &r.rank.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMethod {
    /// Re-embed the pairwise latent distances into the Euclidean plane by
    /// stress minimization, initialized from the PCA coordinates.
    Stress2d,
    /// Classical top-2 principal-component projection with a deterministic
    /// sign convention (largest-magnitude loading positive).
    Pca,
}

impl FromStr for ProjectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stress2d" => Ok(ProjectionMethod::Stress2d),
            "pca" => Ok(ProjectionMethod::Pca),
            other => Err(Error::InvalidConfig(format!("unknown projection method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPoint {
    pub label: String,
    pub kind: EntityKind,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection2d {
    pub points: Vec<ProjectedPoint>,
    /// Mean squared difference between planar distances and the latent
    /// distances the projection tries to preserve.
    pub stress: f64,
    pub method: ProjectionMethod,
}

/// Project all model and task points onto the plane. Targets are the dense
/// pairwise latent distances among ALL points; the achieved stress is
/// returned for quality reporting. Deterministic.
pub fn project_2d(space: &EmbeddingSpace, method: ProjectionMethod) -> Result<Projection2d> {
    let mut labels: Vec<(String, EntityKind)> = Vec::new();
    let mut coords: Vec<&[f64]> = Vec::new();
    for (label, p) in space.model_points() {
        labels.push((label.clone(), EntityKind::Model));
        coords.push(p);
    }
    for (label, p) in space.task_points() {
        labels.push((label.clone(), EntityKind::Task));
        coords.push(p);
    }
    let n = coords.len();
    if n < 3 {
        return Err(Error::TooFewPoints { needed: 3, actual: n });
    }

    let mut constraints = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = space.geometry().distance(coords[i], coords[j])?;
            constraints.push(Constraint { a: i, b: j, target: d });
        }
    }

    let pca_coords = pca_top2(&coords);
    let plane = Geometry::euclidean(2)?;
    let (final_coords, stress) = match method {
        ProjectionMethod::Pca => {
            let stress = mean_sq_residual(&plane, &pca_coords, &constraints)?;
            (pca_coords, stress)
        }
        ProjectionMethod::Stress2d => {
            let config = FitConfig { seed: space.fit_report().seed, ..FitConfig::default() };
            let label_of = |i: usize| labels[i].0.clone();
            let (points, report) =
                minimize(&plane, &constraints, pca_coords, None, &config, &label_of)?;
            (points, report.final_loss)
        }
    };

    let points = labels
        .into_iter()
        .zip(final_coords)
        .map(|((label, kind), c)| ProjectedPoint { label, kind, x: c[0], y: c[1] })
        .collect();
    Ok(Projection2d { points, stress, method })
}

fn mean_sq_residual(
    geometry: &Geometry,
    points: &[Vec<f64>],
    constraints: &[Constraint],
) -> Result<f64> {
    let mut sse = 0.0;
    for c in constraints {
        let d = geometry.distance(&points[c.a], &points[c.b])?;
        sse += (d - c.target) * (d - c.target);
    }
    Ok(sse / constraints.len() as f64)
}

/// Center the coordinates and project them onto the top two principal
/// components. Components are ordered by eigenvalue descending; each is
/// sign-fixed so its largest-magnitude loading is positive. Spaces with
/// fewer than two ambient dimensions pad the second coordinate with zero.
#[allow(clippy::needless_range_loop)]
fn pca_top2(coords: &[&[f64]]) -> Vec<Vec<f64>> {
    let n = coords.len();
    let dim = coords[0].len();
    let mut mean = vec![0.0; dim];
    for p in coords {
        for (m, c) in mean.iter_mut().zip(*p) {
            *m += c;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    let mut cov = vec![vec![0.0; dim]; dim];
    for p in coords {
        for i in 0..dim {
            for j in 0..dim {
                cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]);
            }
        }
    }
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v /= n as f64;
        }
    }

    let (eigenvalues, eigenvectors) = jacobi_eigen(&cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]).then(a.cmp(&b)));

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(2);
    for k in 0..2 {
        if k < dim {
            let col = order[k];
            let mut comp: Vec<f64> = (0..dim).map(|i| eigenvectors[i][col]).collect();
            let lead = comp
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                .map(|(_, &v)| v)
                .unwrap_or(0.0);
            if lead < 0.0 {
                for v in comp.iter_mut() {
                    *v = -*v;
                }
            }
            components.push(comp);
        } else {
            components.push(vec![0.0; dim]);
        }
    }

    coords
        .iter()
        .map(|p| {
            components
                .iter()
                .map(|comp| {
                    p.iter().zip(&mean).zip(comp).map(|((c, m), w)| (c - m) * w).sum::<f64>()
                })
                .collect()
        })
        .collect()
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix. Returns
/// (eigenvalues, eigenvector matrix with eigenvectors as columns).
#[allow(clippy::needless_range_loop)]
fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let eigenvalues = (0..n).map(|i| a[i][i]).collect();
    (eigenvalues, v)
}

/// A labeled, class-colored point of the 2D map.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub label: String,
    pub kind: EntityKind,
    pub x: f64,
    pub y: f64,
    pub class: String,
}

/// 2D map CSV: `label,kind,x,y,class`.
pub fn export_map_csv<W: Write>(points: &[ScatterPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["label", "kind", "x", "y", "class"])?;
    for p in points {
        w.write_record([
            p.label.as_str(),
            p.kind.as_str(),
            &format!("{}", p.x),
            &format!("{}", p.y),
            p.class.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const SVG_WIDTH: f64 = 900.0;
const SVG_HEIGHT: f64 = 640.0;
const SVG_MARGIN: f64 = 60.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Render a standalone SVG scatter of the 2D map: circles for models,
/// squares for tasks, colors keyed by class, text labels, and a legend.
/// Identical input produces byte-identical output.
pub fn render_scatter(points: &[ScatterPoint]) -> String {
    let (min_x, max_x) = bounds(points.iter().map(|p| p.x));
    let (min_y, max_y) = bounds(points.iter().map(|p| p.y));
    let span_x = (max_x - min_x).max(1e-9);
    let span_y = (max_y - min_y).max(1e-9);
    let plot_w = SVG_WIDTH - 2.0 * SVG_MARGIN;
    let plot_h = SVG_HEIGHT - 2.0 * SVG_MARGIN;
    let sx = |x: f64| SVG_MARGIN + (x - min_x) / span_x * plot_w;
    // SVG y grows downward
    let sy = |y: f64| SVG_HEIGHT - SVG_MARGIN - (y - min_y) / span_y * plot_h;

    let mut classes: Vec<&str> = points.iter().map(|p| p.class.as_str()).collect();
    classes.sort_unstable();
    classes.dedup();
    let color_of = |class: &str| {
        let idx = classes.iter().position(|&c| c == class).unwrap_or(0);
        PALETTE[idx % PALETTE.len()]
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\">\n"
    ));
    svg.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "  <rect x=\"{m}\" y=\"{m}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"none\" stroke=\"#cccccc\"/>\n",
        m = SVG_MARGIN,
        w = plot_w,
        h = plot_h
    ));

    for p in points {
        let x = sx(p.x);
        let y = sy(p.y);
        let color = color_of(&p.class);
        match p.kind {
            EntityKind::Model => svg.push_str(&format!(
                "  <circle class=\"marker\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"5\" fill=\"{color}\" fill-opacity=\"0.85\"/>\n"
            )),
            EntityKind::Task => svg.push_str(&format!(
                "  <rect class=\"marker\" x=\"{:.2}\" y=\"{:.2}\" width=\"8\" height=\"8\" fill=\"{color}\" fill-opacity=\"0.85\"/>\n",
                x - 4.0,
                y - 4.0
            )),
        }
        if !p.label.is_empty() {
            svg.push_str(&format!(
                "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"9\" font-family=\"sans-serif\" fill=\"#333333\">{}</text>\n",
                x + 6.0,
                y + 3.0,
                escape_xml(&p.label)
            ));
        }
    }

    for (i, class) in classes.iter().enumerate() {
        let y = SVG_MARGIN + 8.0 + i as f64 * 16.0;
        svg.push_str(&format!(
            "  <rect class=\"legend-swatch\" x=\"{:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
            SVG_WIDTH - SVG_MARGIN + 10.0,
            y - 9.0,
            color_of(class)
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" font-family=\"sans-serif\" fill=\"#333333\">{}</text>\n",
            SVG_WIDTH - SVG_MARGIN + 24.0,
            y,
            escape_xml(class)
        ));
    }

    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() {
        (0.0, 1.0)
    } else {
        (min, max)
    }
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
