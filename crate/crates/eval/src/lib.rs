//! Autonomous lap runs and the metrics used to compare policies: lap time
//! mean and spread, track deviations and response speed.

pub mod ablation;
pub mod demo;
pub mod metrics;
pub mod policy;
pub mod run;
pub mod table;

pub use ablation::{ablation_run, AblationResult, ABLATION_VARIANTS};
pub use demo::{record_demonstration, DemoOptions};
pub use metrics::{count_deviation_edges, summarize, Summary, TrajectorySample};
pub use policy::{check_compatible, ModelPolicy, OraclePolicy, Policy};
pub use run::{
    evaluate_checkpoint, oracle_lap_time, run_laps, DeviationEvent, DeviationKind, DnfReason,
    EvalOptions, LapReport,
};
pub use table::{compare, render_table, ComparisonTable, RenderedTable, TableRow};

use macpilot_core::zoo::ZooError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ZooError),
    #[error(transparent)]
    Sim(#[from] macpilot_sim::SimError),
    #[error(transparent)]
    Dataset(#[from] macpilot_dataset::DatasetError),
    #[error(transparent)]
    Train(#[from] macpilot_train::TrainError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
