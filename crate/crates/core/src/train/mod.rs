//! Training protocol, metrics and multi-seed aggregation.

mod metrics;
mod report;
mod run;

pub use metrics::{compute_metrics, ClassMetrics, Metrics};
pub use report::{aggregate_runs, format_table, Aggregate, RunReport};
pub use run::{
    check_store_compat, cross_evaluate, evaluate, evaluate_set, load_checkpoint, save_checkpoint, train, train_on,
    CrossEvaluation, EpochRecord, LabeledSet, Provenance, TrainedRun, MANIFEST_FILE, PARAMS_FILE,
};
