//! Experiment orchestration: checkpointed training, per-checkpoint
//! evaluation, persisted reports and the analyses run over them.

mod analysis;
mod config;
mod report;
mod run;

pub use analysis::{
    correlate, early_stop_select, final_reports, model_series, robustness_csv, robustness_from_checkpoints,
    robustness_sweep, speedup, theory_report, timing_csv, timing_report, BoundRow, CorrelationResult,
    EarlyStopResult, EarlyStopRow, RobustnessRow, Scope, TheoryConfig, TheoryReport, TimingReport, TimingRow,
    MIN_CLOCK_S,
};
pub use config::{DatasetShape, DatasetSource, ExperimentConfig, SanityBounds};
pub use report::{
    append_report, read_reports, read_reports_from, summary_csv, EvalReport, Metric, REPORT_SCHEMA,
    SCHEMA_VERSION,
};
pub use run::{
    derive_seed, evaluate_model, kp_stage, run_experiment, run_experiment_on, ExperimentOutput, KpStageConfig,
    KpStageOutput, ModelOutcome, RunManifest, StageSeeds,
};
