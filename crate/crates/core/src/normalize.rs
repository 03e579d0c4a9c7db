//! Normalization of raw scores into the gap matrix used as embedding targets.
//!
//! For each task the best literature value gets gap 0; every other model's
//! gap is its distance to that best value, rescaled by the worst observed
//! gap so entries land in [0, 1]. 0 means state of the art, 1 means worst
//! in the literature.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::results::{format_number, ModelKey, ResultsDb, TaskKey};

/// Per-task statistics retained for de-normalization and reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    /// Best raw value observed on the task (the gap-0 anchor).
    pub best_value: f64,
    /// Largest raw gap observed on the task (the gap-1 anchor).
    pub max_delta: f64,
    /// True when all observed values are equal, making the ratio undefined.
    /// Entries on a degenerate task are stored as 0.
    pub degenerate: bool,
}

/// Result of mapping a normalized gap back to raw metric units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Denormalized {
    pub value: f64,
    /// Set when the normalized gap lies outside [0, 1]: the estimate
    /// extrapolates beyond the observed literature bounds.
    pub extrapolated: bool,
}

impl TaskStats {
    /// Map a normalized gap back to raw units with these statistics.
    /// `task_label` is only used in the error message.
    pub fn denormalize(&self, delta_hat: f64, task_label: &str) -> Result<Denormalized> {
        if self.degenerate {
            return Err(Error::DegenerateTask(task_label.to_string()));
        }
        Ok(Denormalized {
            value: self.best_value - delta_hat * self.max_delta,
            extrapolated: !(0.0..=1.0).contains(&delta_hat),
        })
    }
}

/// Sparse matrix of normalized performance gaps over (model, task) pairs.
/// The sparsity pattern is exactly that of the source database.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMatrix {
    models: Vec<ModelKey>,
    tasks: Vec<TaskKey>,
    entries: BTreeMap<(usize, usize), f64>,
    task_stats: Vec<TaskStats>,
}

impl DeltaMatrix {
    /// Build the gap matrix from an aggregated database.
    ///
    /// For each task t with best value p*: delta = p* - p, then each delta is
    /// divided by the task's maximum delta. A task whose values are all equal
    /// has zero spread; its entries are set to 0 and the task is flagged
    /// degenerate rather than rejected, so small corpora never crash.
    pub fn normalize(db: &ResultsDb) -> Result<Self> {
        if !db.is_aggregated() {
            return Err(Error::NotAggregated);
        }
        let models: Vec<ModelKey> = db.models().into_iter().cloned().collect();
        let tasks: Vec<TaskKey> = db.tasks().into_iter().cloned().collect();
        let model_index: BTreeMap<&ModelKey, usize> =
            models.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let task_index: BTreeMap<&TaskKey, usize> =
            tasks.iter().enumerate().map(|(i, k)| (k, i)).collect();

        let mut per_task: Vec<Vec<(usize, f64)>> = vec![Vec::new(); tasks.len()];
        for r in db.records() {
            let m = model_index[&r.model];
            let t = task_index[&r.task];
            per_task[t].push((m, r.value));
        }

        let mut entries = BTreeMap::new();
        let mut task_stats = Vec::with_capacity(tasks.len());
        for (t, observed) in per_task.iter().enumerate() {
            let best = observed.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
            let max_delta = observed.iter().map(|&(_, v)| best - v).fold(0.0, f64::max);
            let degenerate = max_delta == 0.0;
            if degenerate {
                log::debug!("task '{}' has zero spread; entries set to 0", tasks[t].label());
            }
            for &(m, v) in observed {
                let delta = if degenerate { 0.0 } else { (best - v) / max_delta };
                entries.insert((m, t), delta);
            }
            task_stats.push(TaskStats { best_value: best, max_delta, degenerate });
        }
        Ok(Self { models, tasks, entries, task_stats })
    }

    /// Assemble a matrix from explicit parts. Used for synthetic targets
    /// (planted configurations, holdout experiments) where the entries do
    /// not come from raw scores.
    pub fn from_parts(
        models: Vec<ModelKey>,
        tasks: Vec<TaskKey>,
        entries: impl IntoIterator<Item = ((usize, usize), f64)>,
        task_stats: Vec<TaskStats>,
    ) -> Result<Self> {
        if task_stats.len() != tasks.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} task stats, got {}",
                tasks.len(),
                task_stats.len()
            )));
        }
        let mut map = BTreeMap::new();
        for ((m, t), delta) in entries {
            if m >= models.len() || t >= tasks.len() {
                return Err(Error::InvalidConfig(format!("entry ({m}, {t}) out of range")));
            }
            if !(0.0..=1.0).contains(&delta) {
                return Err(Error::InvalidConfig(format!(
                    "entry ({m}, {t}) outside [0, 1]: {delta}"
                )));
            }
            map.insert((m, t), delta);
        }
        Ok(Self { models, tasks, entries: map, task_stats })
    }

    pub fn models(&self) -> &[ModelKey] {
        &self.models
    }

    pub fn tasks(&self) -> &[TaskKey] {
        &self.tasks
    }

    /// Observed entries keyed by (model index, task index), in index order.
    pub fn entries(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.entries
    }

    pub fn entry(&self, model_idx: usize, task_idx: usize) -> Option<f64> {
        self.entries.get(&(model_idx, task_idx)).copied()
    }

    pub fn n_observed(&self) -> usize {
        self.entries.len()
    }

    pub fn task_stats(&self) -> &[TaskStats] {
        &self.task_stats
    }

    pub fn stats_for(&self, task: &TaskKey) -> Option<&TaskStats> {
        self.tasks.iter().position(|t| t == task).map(|i| &self.task_stats[i])
    }

    /// Number of observed entries for one model.
    pub fn model_degree(&self, model_idx: usize) -> usize {
        self.entries.range((model_idx, 0)..(model_idx + 1, 0)).count()
    }

    /// Number of observed entries for one task.
    pub fn task_degree(&self, task_idx: usize) -> usize {
        self.entries.keys().filter(|&&(_, t)| t == task_idx).count()
    }

    /// Map a normalized gap back to raw metric units on the given task.
    pub fn denormalize(&self, delta_hat: f64, task: &TaskKey) -> Result<Denormalized> {
        let stats = self
            .stats_for(task)
            .ok_or_else(|| Error::UnknownLabel { kind: "task", label: task.label() })?;
        stats.denormalize(delta_hat, &task.label())
    }

    /// Copy of this matrix with the given entries removed. Model and task
    /// lists (and per-task statistics) are kept so point identities are
    /// stable across holdout splits.
    pub fn without_entries(&self, holdout: &[(usize, usize)]) -> DeltaMatrix {
        let mut out = self.clone();
        for key in holdout {
            out.entries.remove(key);
        }
        out
    }

    /// Inspection CSV: one row per model, one column per task label, empty
    /// cells for unobserved pairs.
    pub fn export_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["model".to_string()];
        header.extend(self.tasks.iter().map(|t| t.label()));
        w.write_record(&header)?;
        for (m, model) in self.models.iter().enumerate() {
            let mut row = vec![model.label()];
            for t in 0..self.tasks.len() {
                row.push(self.entry(m, t).map(format_number).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
