//! Experiment runs, metrics and acceptance gates.

mod config;
mod metrics;
mod run;

pub use config::{
    parse_config, read_config, write_config, ExperimentConfig, ExperimentKind, ModelKind,
};
pub use metrics::{
    aggregate, final_window_mean, mean_ci95, read_metrics, write_aggregate, write_metrics,
    AggregateRow, CurvePoint, Split,
};
pub use run::{
    all_points, check_gates, make_backend, make_model, run_agent, run_experiment, run_oracle,
    run_seed, suite_for_seed, write_outputs, Gate, OracleAudit, RunResult, TaskAudit,
    FINAL_WINDOW,
};
