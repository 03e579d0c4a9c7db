//! Joint embedding of models and tasks by stress minimization.
//!
//! All model and task points are optimized so that pairwise distances in the
//! chosen geometry reproduce the observed normalized gaps. The objective is
//! the mean squared residual over observed entries only (the matrix is
//! sparse). Optimization is plain first-order descent in ambient
//! coordinates, with a domain projection after every step; runs are
//! single-threaded and bit-reproducible for a fixed seed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::normalize::DeltaMatrix;

/// First-order update rule used by the fitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    GradientDescent,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Relative loss change over a 50-iteration window below which the fit
    /// stops early.
    pub convergence_tolerance: f64,
    /// Points are initialized i.i.d. uniform in [-init_scale, init_scale]
    /// per coordinate, then projected into the domain.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            learning_rate: 0.01,
            optimizer: Optimizer::default(),
            convergence_tolerance: 1e-7,
            init_scale: 0.1,
            seed: 42,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("convergence_tolerance", self.convergence_tolerance),
            ("init_scale", self.init_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if let Optimizer::Adam { beta1, beta2, epsilon } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || epsilon <= 0.0 {
                return Err(Error::InvalidConfig("invalid Adam parameters".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub final_loss: f64,
    pub initial_loss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
}

/// Which side of the bipartite matrix an entity lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Model,
    Task,
}

impl EntityKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EntityKind::Model => "model",
            EntityKind::Task => "task",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "model" => Ok(EntityKind::Model),
            "task" => Ok(EntityKind::Task),
            other => Err(Error::InvalidConfig(format!("unknown entity kind '{other}'"))),
        }
    }
}

/// A fitted configuration of model and task points, keyed by display label.
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    geometry: Geometry,
    model_points: BTreeMap<String, Vec<f64>>,
    task_points: BTreeMap<String, Vec<f64>>,
    fit_report: FitReport,
}

/// On-disk form of an embedding. Keys are sorted; floats round-trip exactly.
#[derive(Serialize, Deserialize)]
struct SpaceFile {
    geometry: Geometry,
    seed: u64,
    loss: f64,
    model_points: BTreeMap<String, Vec<f64>>,
    task_points: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingSpace {
    pub fn new(
        geometry: Geometry,
        model_points: BTreeMap<String, Vec<f64>>,
        task_points: BTreeMap<String, Vec<f64>>,
        fit_report: FitReport,
    ) -> Result<Self> {
        for p in model_points.values().chain(task_points.values()) {
            geometry.validate_point(p)?;
        }
        Ok(Self { geometry, model_points, task_points, fit_report })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn model_points(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.model_points
    }

    pub fn task_points(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.task_points
    }

    pub fn model_point(&self, label: &str) -> Option<&[f64]> {
        self.model_points.get(label).map(Vec::as_slice)
    }

    pub fn task_point(&self, label: &str) -> Option<&[f64]> {
        self.task_points.get(label).map(Vec::as_slice)
    }

    pub fn points_of(&self, kind: EntityKind) -> &BTreeMap<String, Vec<f64>> {
        match kind {
            EntityKind::Model => &self.model_points,
            EntityKind::Task => &self.task_points,
        }
    }

    pub fn fit_report(&self) -> &FitReport {
        &self.fit_report
    }

    /// Mean squared residual of this space against a gap matrix, averaged
    /// over the observed entries.
    pub fn loss(&self, delta: &DeltaMatrix) -> Result<f64> {
        if delta.n_observed() == 0 {
            return Err(Error::EmptyDelta);
        }
        let model_pts =
            resolve_points(&self.model_points, delta.models().iter().map(|k| k.label()), "model")?;
        let task_pts =
            resolve_points(&self.task_points, delta.tasks().iter().map(|k| k.label()), "task")?;
        let mut sse = 0.0;
        for (&(m, t), &target) in delta.entries() {
            let d = self.geometry.distance(model_pts[m], task_pts[t])?;
            let r = d - target;
            sse += r * r;
        }
        Ok(sse / delta.n_observed() as f64)
    }

    /// Copy of this space with one extra point added under `label`.
    pub fn with_added_point(
        &self,
        kind: EntityKind,
        label: &str,
        point: Vec<f64>,
    ) -> Result<EmbeddingSpace> {
        self.geometry.validate_point(&point)?;
        let mut out = self.clone();
        let map = match kind {
            EntityKind::Model => &mut out.model_points,
            EntityKind::Task => &mut out.task_points,
        };
        if map.contains_key(label) {
            return Err(Error::DuplicateLabel { kind: kind.as_str(), label: label.to_string() });
        }
        map.insert(label.to_string(), point);
        Ok(out)
    }

    /// Check every point against the geometry's domain invariants.
    pub fn validate_domain(&self) -> Result<()> {
        for p in self.model_points.values().chain(self.task_points.values()) {
            self.geometry.validate_point(p)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SpaceFile {
            geometry: self.geometry,
            seed: self.fit_report.seed,
            loss: self.fit_report.final_loss,
            model_points: self.model_points.clone(),
            task_points: self.task_points.clone(),
        };
        // Route through Value so object keys come out sorted.
        let value = serde_json::to_value(&file)?;
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    /// Parse an embedding written by [`EmbeddingSpace::to_json`]. The file
    /// stores only the final loss and seed; iteration count and convergence
    /// flag are unknown for imported spaces and read back as zero/false.
    pub fn from_json(data: &str) -> Result<Self> {
        let file: SpaceFile = serde_json::from_str(data)?;
        let report = FitReport {
            final_loss: file.loss,
            initial_loss: file.loss,
            iterations: 0,
            converged: false,
            seed: file.seed,
        };
        Self::new(file.geometry, file.model_points, file.task_points, report)
    }
}

fn resolve_points<'a>(
    map: &'a BTreeMap<String, Vec<f64>>,
    labels: impl Iterator<Item = String>,
    kind: &'static str,
) -> Result<Vec<&'a [f64]>> {
    labels
        .map(|label| map.get(&label).map(Vec::as_slice).ok_or(Error::UnknownLabel { kind, label }))
        .collect()
}

/// Fit all model and task positions against a gap matrix.
///
/// Deterministic for a fixed seed. The returned configuration is the
/// best-loss iterate encountered, so the final loss never exceeds the
/// initial one even though Adam itself is non-monotone.
pub fn fit(delta: &DeltaMatrix, geometry: Geometry, config: &FitConfig) -> Result<EmbeddingSpace> {
    config.validate()?;
    if delta.n_observed() == 0 {
        return Err(Error::EmptyDelta);
    }
    let model_labels: Vec<String> = delta.models().iter().map(|k| k.label()).collect();
    let task_labels: Vec<String> = delta.tasks().iter().map(|k| k.label()).collect();
    check_unique(&model_labels, "model")?;
    check_unique(&task_labels, "task")?;

    let n_models = model_labels.len();
    let n_points = n_models + task_labels.len();
    let constraints: Vec<Constraint> = delta
        .entries()
        .iter()
        .map(|(&(m, t), &target)| Constraint { a: m, b: n_models + t, target })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = random_points(&mut rng, n_points, &geometry, config.init_scale);
    let labeler = |i: usize| {
        if i < n_models {
            format!("model {}", model_labels[i])
        } else {
            format!("task {}", task_labels[i - n_models])
        }
    };
    let (points, report) = minimize(&geometry, &constraints, init, None, config, &labeler)?;

    let model_points =
        model_labels.into_iter().zip(points.iter().take(n_models).cloned()).collect();
    let task_points = task_labels.into_iter().zip(points.into_iter().skip(n_models)).collect();
    EmbeddingSpace::new(geometry, model_points, task_points, report)
}

/// Result of inserting one new entity into a frozen space.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedPoint {
    pub coords: Vec<f64>,
    /// Residual mean squared error against the known entries; positive when
    /// the targets are infeasible.
    pub loss: f64,
}

/// Number of random restarts used when placing a single entity; the
/// one-point problem is non-convex.
pub const PLACE_RESTARTS: usize = 8;

/// Fit one new point of the given kind against a frozen space, using only
/// the entity's known gaps to existing opposite-kind entities. Multi-start:
/// the lowest-loss solution over [`PLACE_RESTARTS`] seeded restarts wins.
pub fn place_entity(
    space: &EmbeddingSpace,
    kind: EntityKind,
    known_entries: &BTreeMap<String, f64>,
    config: &FitConfig,
) -> Result<PlacedPoint> {
    config.validate()?;
    if known_entries.is_empty() {
        return Err(Error::EmptyPlacement);
    }
    let anchor_map = match kind {
        EntityKind::Model => &space.task_points,
        EntityKind::Task => &space.model_points,
    };
    let anchor_kind = match kind {
        EntityKind::Model => "task",
        EntityKind::Task => "model",
    };

    let geometry = space.geometry;
    let mut points = vec![Vec::new()]; // slot 0 is the point being placed
    let mut constraints = Vec::with_capacity(known_entries.len());
    for (label, &target) in known_entries {
        let anchor = anchor_map
            .get(label)
            .ok_or_else(|| Error::UnknownLabel { kind: anchor_kind, label: label.clone() })?;
        constraints.push(Constraint { a: 0, b: points.len(), target });
        points.push(anchor.clone());
    }
    let mut frozen = vec![true; points.len()];
    frozen[0] = false;

    let labeler = |i: usize| {
        if i == 0 {
            "new point".to_string()
        } else {
            known_entries.keys().nth(i - 1).cloned().unwrap_or_default()
        }
    };

    let mut best: Option<PlacedPoint> = None;
    for restart in 0..PLACE_RESTARTS {
        let seed = config.seed.wrapping_add((restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = points.clone();
        init[0] = random_point(&mut rng, &geometry, config.init_scale);
        let restart_config = FitConfig { seed, ..*config };
        let (fitted, report) =
            minimize(&geometry, &constraints, init, Some(&frozen), &restart_config, &labeler)?;
        if best.as_ref().is_none_or(|b| report.final_loss < b.loss) {
            best = Some(PlacedPoint { coords: fitted[0].clone(), loss: report.final_loss });
        }
    }
    Ok(best.expect("at least one restart runs"))
}

fn check_unique(labels: &[String], kind: &'static str) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for label in labels {
        if !seen.insert(label) {
            return Err(Error::DuplicateLabel { kind, label: label.clone() });
        }
    }
    Ok(())
}

fn random_point(rng: &mut ChaCha8Rng, geometry: &Geometry, scale: f64) -> Vec<f64> {
    let mut p: Vec<f64> = (0..geometry.dim).map(|_| rng.gen_range(-scale..scale)).collect();
    geometry.project_in_place(&mut p);
    p
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, geometry: &Geometry, scale: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| random_point(rng, geometry, scale)).collect()
}

/// One distance target between two point slots.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Constraint {
    pub a: usize,
    pub b: usize,
    pub target: f64,
}

/// Window length for the relative-change convergence test.
const CONVERGENCE_WINDOW: usize = 50;

/// Minimize the mean squared residual of `constraints` over the free points.
/// `frozen` marks points that must not move (placement against a fixed
/// space). Gradients accumulate in constraint order and the update is
/// single-threaded, so results are bit-reproducible.
///
/// Returns the best iterate seen, not the last one.
pub(crate) fn minimize(
    geometry: &Geometry,
    constraints: &[Constraint],
    mut points: Vec<Vec<f64>>,
    frozen: Option<&[bool]>,
    config: &FitConfig,
    label_of: &dyn Fn(usize) -> String,
) -> Result<(Vec<Vec<f64>>, FitReport)> {
    let n_points = points.len();
    let dim = geometry.dim;
    let n_entries = constraints.len() as f64;
    for (i, p) in points.iter_mut().enumerate() {
        if !frozen.is_some_and(|f| f[i]) {
            geometry.project_in_place(p);
        }
    }

    let mut grad = vec![vec![0.0; dim]; n_points];
    let mut adam_m = vec![0.0; n_points * dim];
    let mut adam_v = vec![0.0; n_points * dim];

    let eval = |points: &[Vec<f64>], grad: &mut [Vec<f64>], iteration: usize| -> Result<f64> {
        for g in grad.iter_mut() {
            g.fill(0.0);
        }
        let mut sse = 0.0;
        for c in constraints {
            let d = geometry.distance(&points[c.a], &points[c.b])?;
            let r = d - c.target;
            sse += r * r;
            if !sse.is_finite() {
                return Err(Error::NonFiniteLoss { iteration, a: label_of(c.a), b: label_of(c.b) });
            }
            let dg = geometry.distance_gradient(&points[c.a], &points[c.b])?;
            if dg.subgradient {
                continue;
            }
            let w = 2.0 * r / n_entries;
            for (slot, g) in grad[c.a].iter_mut().zip(&dg.wrt_u) {
                *slot += w * g;
            }
            for (slot, g) in grad[c.b].iter_mut().zip(&dg.wrt_v) {
                *slot += w * g;
            }
        }
        Ok(sse / n_entries)
    };

    let initial_loss = eval(&points, &mut grad, 0)?;
    let mut best_loss = initial_loss;
    let mut best_points = points.clone();
    let mut window: Vec<f64> = vec![initial_loss];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=config.max_iterations {
        iterations = iter;
        // grad currently holds the gradient at `points` from the last eval
        for (i, p) in points.iter_mut().enumerate() {
            if frozen.is_some_and(|f| f[i]) {
                continue;
            }
            match config.optimizer {
                Optimizer::GradientDescent => {
                    for (c, g) in p.iter_mut().zip(&grad[i]) {
                        *c -= config.learning_rate * g;
                    }
                }
                Optimizer::Adam { beta1, beta2, epsilon } => {
                    let t = iter as i32;
                    for (j, (c, g)) in p.iter_mut().zip(&grad[i]).enumerate() {
                        let slot = i * dim + j;
                        adam_m[slot] = beta1 * adam_m[slot] + (1.0 - beta1) * g;
                        adam_v[slot] = beta2 * adam_v[slot] + (1.0 - beta2) * g * g;
                        let m_hat = adam_m[slot] / (1.0 - beta1.powi(t));
                        let v_hat = adam_v[slot] / (1.0 - beta2.powi(t));
                        *c -= config.learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
            geometry.project_in_place(p);
        }

        let loss = eval(&points, &mut grad, iter)?;
        if loss < best_loss {
            best_loss = loss;
            best_points.clone_from(&points);
        }
        window.push(loss);
        if window.len() > CONVERGENCE_WINDOW {
            let prev = window[window.len() - 1 - CONVERGENCE_WINDOW];
            let rel = (loss - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
            if rel < config.convergence_tolerance {
                converged = true;
                break;
            }
        }
    }

    let report =
        FitReport { final_loss: best_loss, initial_loss, iterations, converged, seed: config.seed };
    Ok((best_points, report))
}
