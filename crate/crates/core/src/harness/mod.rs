//! Training runs and the multi-run experiment protocols built on them.

mod config;
mod experiments;
mod output;
mod train;

pub use config::{DatasetSpec, RunConfig};
pub use experiments::{
    alpha_beta_sweep, bench_matrix, budget_to_target, extended_config, mean_std, run_all, AggregateCell,
    BenchReport, BudgetReport, BudgetRow, RunOutcome, SweepReport, BUDGET_INCREMENT,
};
pub use output::{
    aggregate_json, save_aggregate_json, save_metrics_csv, write_metrics_csv, AggregateJson, METRICS_COLUMNS,
};
pub use train::{train_on, train_run, train_unpruned, MetricsRecord, RunResult};
