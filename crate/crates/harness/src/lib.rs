//! Experiment orchestration for the gridworld testbed: configuration, the
//! variant × train-size × seed matrix with resumable CSV output, table
//! reports, and episode traces.

pub mod config;
pub mod matrix;
pub mod report;
pub mod results;
pub mod trace;
pub mod variant;

pub use config::Settings;
pub use matrix::{run_matrix, ExperimentSpec, MatrixOutcome, TRAIN_SIZES};
pub use report::{emit_report, Report};
pub use results::{ResultsTable, RunRecord};
pub use trace::{trace_episode, Trace};
pub use variant::Variant;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] gridx::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] gridx::checkpoint::LoadError),
}

impl HarnessError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) | HarnessError::Checkpoint(_) => 2,
            HarnessError::Core(gridx::Error::NonFinite { .. }) => 3,
            HarnessError::Core(gridx::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}
