//! Experiment orchestration: reconnaissance, the passive and active pointing
//! strategies, Monte-Carlo repetition, metrics and persistence.

mod config;
mod episode;
mod experiment;
mod export;
mod metrics;

pub use config::{ExperimentConfig, OrbitConfig, Strategy};
pub use episode::{refine_reconnaissance, run_episode, EpisodeSpec, RunRecord, SolverSummary};
pub use experiment::{
    aggregate_paths, episode_spec, experiment_scene, failure_counts, load_failures, load_records,
    plan_for, plan_reconnaissance, record_path, run_experiment, simulate_experiment, stream_seed,
    write_aggregates, write_experiment, write_text, EpisodeFailure, ExperimentOutput, PlanSummary,
};
pub use export::figure_csvs;
pub use metrics::{aggregate, fmt_f64, metric_coverage, AggregateTable, PlanMapMetrics};
