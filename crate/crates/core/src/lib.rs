//! Joint metric embedding of benchmark models and tasks.
//!
//! The crate ingests a database of fine-tuning results harvested from the
//! literature, normalizes each task's scores into gaps in [0, 1] (0 = state
//! of the art, 1 = worst reported), and fits one point per model and per
//! task in a shared metric space so that pairwise distances reproduce the
//! gaps. Distances to a new task's point then predict how far a model will
//! land from the best known result without running a single fine-tuning.
//!
//! Pipeline: [`results::ResultsDb`] -> [`normalize::DeltaMatrix`] ->
//! [`embedder::fit`] -> [`evaluator`] / [`analysis`].

pub mod analysis;
pub mod embedder;
pub mod error;
pub mod evaluator;
pub mod geometry;
pub mod normalize;
pub mod results;

pub use analysis::{
    centrality, dataset_quality, dataset_quality_with, project_2d, render_scatter, CentralityRow,
    Projection2d, ProjectionMethod, QualityRow, SaturationThresholds, ScatterPoint,
};
pub use embedder::{
    fit, place_entity, EmbeddingSpace, EntityKind, FitConfig, FitReport, Optimizer, PlacedPoint,
};
pub use error::{Error, Result};
pub use evaluator::{
    compare_geometries, error_by_degree, error_by_degree_with_edges, run_splits, DegreeBucket,
    DegreeErrorTable, EvalReport, GeometryComparison, PredictionRow, ScatterRow, SplitPlan,
};
pub use geometry::{DistanceGradient, Geometry, GeometryKind};
pub use normalize::{DeltaMatrix, Denormalized, TaskStats};
pub use results::{ArchFamily, InputFormat, ModelKey, PerformanceRecord, ResultsDb, TaskKey};
