//! Evaluation: ranking metrics, the multi-method comparison experiment,
//! the temperature sweep, and pseudo-label ranking reports.

pub mod benchmark;
pub mod metrics;
pub mod rank;

pub use benchmark::{
    geometric_mean_scores, run_benchmark, run_benchmark_seed, temperature_sweep, AggregateRow,
    BenchConfig, ExperimentReport, LambdaChoice, Method, MethodRow, ReportMeta,
};
pub use metrics::{
    average_precision, mean_average_precision, model_scores, split_map, ScoreMatrix,
};
pub use rank::{rank_by_pseudo, ranking_csv, RankEntry};
