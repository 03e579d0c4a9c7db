//! Database of fine-tuning results harvested from the literature.
//!
//! A result is one scalar performance value of a model variant on a
//! downstream task, where a task is the full `(dataset, fraction, metric)`
//! triplet: the same dataset at a different training fraction or scored
//! with a different metric is a different task.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::fs::File;
use std::hash::{Hash, Hasher};
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identity of a model variant. Keys are case-sensitive exact strings; no
/// normalization is applied, so "ViT-B" and "ViT-L" backbones stay distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelKey {
    pub method: String,
    pub backbone: String,
}

impl ModelKey {
    pub fn new(method: impl Into<String>, backbone: impl Into<String>) -> Result<Self> {
        let method = method.into();
        if method.is_empty() {
            return Err(Error::InvalidKey("model method name must be non-empty".into()));
        }
        Ok(Self { method, backbone: backbone.into() })
    }

    /// Display label: method name plus backbone when one is set.
    pub fn label(&self) -> String {
        if self.backbone.is_empty() {
            self.method.clone()
        } else {
            format!("{} {}", self.method, self.backbone)
        }
    }
}

impl fmt::Display for ModelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Identity of a downstream task: dataset, training fraction in percent,
/// and the reported metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskKey {
    pub dataset: String,
    pub fraction: f64,
    pub metric: String,
}

impl TaskKey {
    pub fn new(
        dataset: impl Into<String>,
        fraction: f64,
        metric: impl Into<String>,
    ) -> Result<Self> {
        let dataset = dataset.into();
        let metric = metric.into();
        if dataset.is_empty() {
            return Err(Error::InvalidKey("task dataset must be non-empty".into()));
        }
        if metric.is_empty() {
            return Err(Error::InvalidKey("task metric must be non-empty".into()));
        }
        if !fraction.is_finite() || fraction <= 0.0 || fraction > 100.0 {
            return Err(Error::InvalidKey(format!(
                "task fraction must lie in (0, 100], got {fraction}"
            )));
        }
        Ok(Self { dataset, fraction, metric })
    }

    /// Display label, e.g. `Potsdam@100%/mF1`.
    pub fn label(&self) -> String {
        format!("{}@{}%/{}", self.dataset, format_number(self.fraction), self.metric)
    }
}

impl fmt::Display for TaskKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl PartialEq for TaskKey {
    fn eq(&self, other: &Self) -> bool {
        self.dataset == other.dataset
            && self.fraction.to_bits() == other.fraction.to_bits()
            && self.metric == other.metric
    }
}

impl Eq for TaskKey {}

impl Hash for TaskKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.dataset.hash(state);
        self.fraction.to_bits().hash(state);
        self.metric.hash(state);
    }
}

impl PartialOrd for TaskKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TaskKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dataset
            .cmp(&other.dataset)
            .then(self.fraction.total_cmp(&other.fraction))
            .then(self.metric.cmp(&other.metric))
    }
}

/// Coarse architecture family of a model backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArchFamily {
    Cnn,
    Vit,
    Swin,
    Other,
}

impl ArchFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            ArchFamily::Cnn => "CNN",
            ArchFamily::Vit => "ViT",
            ArchFamily::Swin => "Swin",
            ArchFamily::Other => "other",
        }
    }
}

impl FromStr for ArchFamily {
    type Err = std::convert::Infallible;

    /// Case-insensitive; unrecognized names map to `Other`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "cnn" => ArchFamily::Cnn,
            "vit" => ArchFamily::Vit,
            "swin" => ArchFamily::Swin,
            _ => ArchFamily::Other,
        })
    }
}

impl fmt::Display for ArchFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

/// One literature result: a model's score on a task, higher is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub model: ModelKey,
    pub task: TaskKey,
    pub value: f64,
    pub source: String,
    pub arch_family: Option<ArchFamily>,
    pub param_count: Option<u64>,
}

/// Metrics reported as percentages, bounded to [0, 100].
const BOUNDED_METRICS: &[&str] = &["oa", "mf1", "miou", "map", "f1", "acc", "accuracy"];

/// Whether `metric` is a percentage-style score bounded above by 100.
pub fn metric_is_bounded(metric: &str) -> bool {
    let lower = metric.to_ascii_lowercase();
    BOUNDED_METRICS.contains(&lower.as_str())
}

fn validate_value(metric: &str, value: f64) -> std::result::Result<(), String> {
    if !value.is_finite() {
        return Err(format!("value must be finite, got {value}"));
    }
    if metric_is_bounded(metric) && !(0.0..=100.0).contains(&value) {
        return Err(format!("value out of range [0, 100] for metric {metric}: {value}"));
    }
    if metric.eq_ignore_ascii_case("psnr") && value <= 0.0 {
        return Err(format!("PSNR must be positive, got {value}"));
    }
    Ok(())
}

/// Input format accepted by [`ResultsDb::ingest_path`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Csv,
    Json,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(InputFormat::Csv),
            "json" => Ok(InputFormat::Json),
            other => Err(Error::InvalidConfig(format!("unknown input format '{other}'"))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 9] = [
    "method",
    "backbone",
    "dataset",
    "fraction",
    "metric",
    "value",
    "source",
    "arch_family",
    "param_count",
];

/// The collected fine-tuning results. Records are kept in ingestion order;
/// that order is the tie-break for duplicate aggregation and fixes all
/// downstream orderings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsDb {
    records: Vec<PerformanceRecord>,
}

impl ResultsDb {
    pub fn from_records(records: Vec<PerformanceRecord>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[PerformanceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct models in first-appearance order.
    pub fn models(&self) -> Vec<&ModelKey> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for r in &self.records {
            if seen.insert(&r.model, ()).is_none() {
                out.push(&r.model);
            }
        }
        out
    }

    /// Distinct tasks in first-appearance order.
    pub fn tasks(&self) -> Vec<&TaskKey> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for r in &self.records {
            if seen.insert(&r.task, ()).is_none() {
                out.push(&r.task);
            }
        }
        out
    }

    /// True when no (model, task) pair appears twice.
    pub fn is_aggregated(&self) -> bool {
        let mut seen = HashMap::new();
        for r in &self.records {
            if seen.insert((&r.model, &r.task), ()).is_some() {
                return false;
            }
        }
        true
    }

    pub fn ingest_path(path: impl AsRef<Path>, format: InputFormat) -> Result<Self> {
        let path = path.as_ref();
        let mut file = File::open(path)?;
        let mut contents = String::new();
        file.read_to_string(&mut contents)?;
        let db = match format {
            InputFormat::Csv => Self::ingest_csv(&contents)?,
            InputFormat::Json => Self::ingest_json(&contents)?,
        };
        if db.is_empty() {
            return Err(Error::EmptyInput(path.display().to_string()));
        }
        Ok(db)
    }

    /// Parse CSV input. Header required; the nine canonical columns may
    /// appear in any order; extra columns are ignored. One record per row,
    /// duplicates kept as-is.
    pub fn ingest_csv(data: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(data.as_bytes());
        let headers = reader.headers()?.clone();
        let mut index = HashMap::new();
        for (i, name) in headers.iter().enumerate() {
            index.insert(name.to_string(), i);
        }
        let mut columns = [0usize; 9];
        for (slot, name) in columns.iter_mut().zip(CSV_COLUMNS) {
            *slot = *index.get(name).ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        }

        let mut records = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let row_no = i + 1;
            let row = row?;
            let field = |col: usize| -> Result<&str> {
                row.get(columns[col]).ok_or_else(|| Error::MalformedRow {
                    row: row_no,
                    message: format!("missing field '{}'", CSV_COLUMNS[col]),
                })
            };
            let raw = RawRecord {
                method: Some(field(0)?.to_string()),
                backbone: Some(field(1)?.to_string()),
                dataset: Some(field(2)?.to_string()),
                fraction: parse_optional_f64(field(3)?, row_no, "fraction")?,
                metric: Some(field(4)?.to_string()),
                value: parse_optional_f64(field(5)?, row_no, "value")?,
                source: Some(field(6)?.to_string()),
                arch_family: none_if_empty(field(7)?),
                param_count: parse_optional_u64(field(8)?, row_no, "param_count")?,
            };
            records.push(raw.validate(row_no)?);
        }
        Ok(Self { records })
    }

    /// Parse JSON input: an array of objects with the canonical field names.
    pub fn ingest_json(data: &str) -> Result<Self> {
        let raws: Vec<RawRecord> = serde_json::from_str(data)?;
        let mut records = Vec::new();
        for (i, raw) in raws.into_iter().enumerate() {
            records.push(raw.validate(i + 1)?);
        }
        Ok(Self { records })
    }

    /// Collapse duplicate (model, task) pairs, keeping the highest reported
    /// value. Ties keep the first-ingested record. Each surviving record
    /// stays at the position of the pair's first occurrence.
    pub fn aggregate_max(&self) -> ResultsDb {
        let mut by_pair: HashMap<(&ModelKey, &TaskKey), usize> = HashMap::new();
        let mut out: Vec<PerformanceRecord> = Vec::new();
        for r in &self.records {
            match by_pair.get(&(&r.model, &r.task)) {
                Some(&slot) => {
                    if r.value > out[slot].value {
                        out[slot] = r.clone();
                    }
                }
                None => {
                    out.push(r.clone());
                    by_pair.insert((&r.model, &r.task), out.len() - 1);
                }
            }
        }
        ResultsDb { records: out }
    }

    /// Keep only records whose model and task both meet the degree
    /// thresholds, iterated to a fixed point: removing a model can push a
    /// task below threshold and vice versa. The result is the unique maximal
    /// sub-database satisfying both constraints. Empty output is not an
    /// error; a warning is logged.
    pub fn filter_min_degree(&self, min_model_degree: usize, min_task_degree: usize) -> ResultsDb {
        let mut model_ids: HashMap<&ModelKey, usize> = HashMap::new();
        let mut task_ids: HashMap<&TaskKey, usize> = HashMap::new();
        let mut model_records: Vec<Vec<usize>> = Vec::new();
        let mut task_records: Vec<Vec<usize>> = Vec::new();
        let mut record_model = Vec::with_capacity(self.records.len());
        let mut record_task = Vec::with_capacity(self.records.len());

        for (i, r) in self.records.iter().enumerate() {
            let m = *model_ids.entry(&r.model).or_insert_with(|| {
                model_records.push(Vec::new());
                model_records.len() - 1
            });
            let t = *task_ids.entry(&r.task).or_insert_with(|| {
                task_records.push(Vec::new());
                task_records.len() - 1
            });
            model_records[m].push(i);
            task_records[t].push(i);
            record_model.push(m);
            record_task.push(t);
        }

        let mut model_deg: Vec<usize> = model_records.iter().map(Vec::len).collect();
        let mut task_deg: Vec<usize> = task_records.iter().map(Vec::len).collect();
        let mut alive = vec![true; self.records.len()];
        let mut model_dead = vec![false; model_deg.len()];
        let mut task_dead = vec![false; task_deg.len()];

        // Peel under-connected entities until both constraints hold.
        let mut queue: VecDeque<(bool, usize)> = VecDeque::new();
        for (m, &d) in model_deg.iter().enumerate() {
            if d < min_model_degree {
                model_dead[m] = true;
                queue.push_back((true, m));
            }
        }
        for (t, &d) in task_deg.iter().enumerate() {
            if d < min_task_degree {
                task_dead[t] = true;
                queue.push_back((false, t));
            }
        }
        while let Some((is_model, id)) = queue.pop_front() {
            let members = if is_model { &model_records[id] } else { &task_records[id] };
            for &rec in members {
                if !alive[rec] {
                    continue;
                }
                alive[rec] = false;
                let m = record_model[rec];
                let t = record_task[rec];
                model_deg[m] -= 1;
                task_deg[t] -= 1;
                if !model_dead[m] && model_deg[m] < min_model_degree {
                    model_dead[m] = true;
                    queue.push_back((true, m));
                }
                if !task_dead[t] && task_deg[t] < min_task_degree {
                    task_dead[t] = true;
                    queue.push_back((false, t));
                }
            }
        }

        let records: Vec<PerformanceRecord> = self
            .records
            .iter()
            .enumerate()
            .filter(|(i, _)| alive[*i])
            .map(|(_, r)| r.clone())
            .collect();
        if records.is_empty() && !self.records.is_empty() {
            log::warn!(
                "degree filter (model >= {min_model_degree}, task >= {min_task_degree}) removed every record"
            );
        }
        ResultsDb { records }
    }

    /// Write canonical CSV. Mirrors the import schema; floats are printed at
    /// full round-trip precision.
    pub fn export_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_COLUMNS)?;
        for r in &self.records {
            w.write_record([
                r.model.method.as_str(),
                r.model.backbone.as_str(),
                r.task.dataset.as_str(),
                &format_number(r.task.fraction),
                r.task.metric.as_str(),
                &format_number(r.value),
                r.source.as_str(),
                r.arch_family.map(|a| a.as_str()).unwrap_or(""),
                &r.param_count.map(|p| p.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Write the JSON mirror of the CSV schema (array of objects, keys sorted).
    pub fn export_json<W: Write>(&self, mut writer: W) -> Result<()> {
        let raws: Vec<RawRecord> = self.records.iter().map(RawRecord::from_record).collect();
        let value = serde_json::to_value(&raws)?;
        writer.write_all(serde_json::to_string_pretty(&value)?.as_bytes())?;
        writer.write_all(b"\n")?;
        Ok(())
    }
}

/// Print a float with the shortest representation that parses back to the
/// same bits; integral values drop the fractional part.
pub(crate) fn format_number(x: f64) -> String {
    let mut s = format!("{x}");
    if s.ends_with(".0") {
        s.truncate(s.len() - 2);
    }
    s
}

fn none_if_empty(s: &str) -> Option<String> {
    if s.is_empty() {
        None
    } else {
        Some(s.to_string())
    }
}

fn parse_optional_f64(s: &str, row: usize, field: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::MalformedRow { row, message: format!("non-numeric {field} '{s}'") })
}

fn parse_optional_u64(s: &str, row: usize, field: &str) -> Result<Option<u64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<u64>().map(Some).map_err(|_| Error::MalformedRow {
        row,
        message: format!("invalid {field} '{s}' (positive integer expected)"),
    })
}

/// Wire form of one record, shared by the JSON codec and row validation.
/// A missing fraction defaults to 100 (the full training set); the metric
/// has no default because it is part of task identity.
#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    method: Option<String>,
    #[serde(default)]
    backbone: Option<String>,
    dataset: Option<String>,
    #[serde(default)]
    fraction: Option<f64>,
    metric: Option<String>,
    value: Option<f64>,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    arch_family: Option<String>,
    #[serde(default)]
    param_count: Option<u64>,
}

impl RawRecord {
    fn from_record(r: &PerformanceRecord) -> Self {
        Self {
            method: Some(r.model.method.clone()),
            backbone: Some(r.model.backbone.clone()),
            dataset: Some(r.task.dataset.clone()),
            fraction: Some(r.task.fraction),
            metric: Some(r.task.metric.clone()),
            value: Some(r.value),
            source: Some(r.source.clone()),
            arch_family: r.arch_family.map(|a| a.as_str().to_string()),
            param_count: r.param_count,
        }
    }

    fn validate(self, row: usize) -> Result<PerformanceRecord> {
        let bad = |message: String| Error::MalformedRow { row, message };
        let method =
            self.method.filter(|s| !s.is_empty()).ok_or_else(|| bad("missing method".into()))?;
        let dataset =
            self.dataset.filter(|s| !s.is_empty()).ok_or_else(|| bad("missing dataset".into()))?;
        let metric =
            self.metric.filter(|s| !s.is_empty()).ok_or_else(|| bad("missing metric".into()))?;
        let value = self.value.ok_or_else(|| bad("missing value".into()))?;
        let fraction = self.fraction.unwrap_or(100.0);
        if !fraction.is_finite() || fraction <= 0.0 || fraction > 100.0 {
            return Err(bad(format!("fraction out of range (0, 100]: {fraction}")));
        }
        validate_value(&metric, value).map_err(bad)?;
        let model = ModelKey::new(method, self.backbone.unwrap_or_default())
            .map_err(|e| bad(e.to_string()))?;
        let task = TaskKey::new(dataset, fraction, metric).map_err(|e| bad(e.to_string()))?;
        Ok(PerformanceRecord {
            model,
            task,
            value,
            source: self.source.unwrap_or_default(),
            arch_family: self.arch_family.map(|s| s.parse().unwrap()),
            param_count: self.param_count,
        })
    }
}
