//! Metrics, scenario datasets and experiment tables.

pub mod dataset;
mod experiment;
mod metrics;

pub use dataset::{generate_dataset, Dataset, DatasetConfig, Manifest, ScenarioRecord};
pub use experiment::{
    aggregate, evaluate_record, evaluate_records, run_experiment, CardinalityRow,
    EvaluationRecord, ExperimentReport, PriorBook,
};
pub use metrics::{
    classification_metrics, confusion, normalized_error, ClassificationMetrics, ConfusionCounts,
    Summary,
};
