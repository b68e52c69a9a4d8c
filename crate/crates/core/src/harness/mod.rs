//! Experiment runner: configuration, seeded replications, metric files,
//! evaluation, density hints and run comparison.

mod config;
pub mod criteria;
mod metrics;
mod report;
mod run;

pub use config::{build_policy, ExperimentConfig, NetworkConfig, PolicyConfig, EVAL_EPISODES, PRESETS, SCHEMA_VERSION};
pub use metrics::{read_metrics, read_returns, rolling_stats, write_metrics, write_returns, MetricsRow, RollingWindow};
pub use report::{
    bootstrap_ci, compare_runs, emit_kde_data, load_eval_returns, silverman_bandwidth, summarize, ComparisonReport, KdeHint, RunSummary,
    BOOTSTRAP_DRAWS,
};
pub use run::{
    evaluate, evaluation_rollouts, replication_dir, run_experiment, run_replication, Checkpoint, Manifest, ReplicationManifest,
    ReplicationResult,
};
