//! Training, evaluation and the three experiment drivers.

pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod runner;
pub mod train;

pub use metrics::{aggregate_runs, Aggregate, ClassScores, Metrics, Stat};
pub use pipeline::{extract_features, ExtractionReport};
pub use report::{check_consistency, render_csv, render_markdown};
pub use runner::{
    default_combos, default_pairs, run_experiment1, run_experiment2, run_experiment3, split_file_name, ExperimentData,
    ExperimentKind, ExperimentOutput, ExperimentResults, RunOptions, RunRecord, RunRow, RunTable,
};
pub use train::{evaluate, train, EpochRecord, Evaluation, FeatureView, TrainConfig, TrainOutcome, TrainedModel, DEFAULT_SEEDS};
