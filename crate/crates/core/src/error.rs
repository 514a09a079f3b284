use thiserror::Error;

/// Errors raised by the environment, models and learners.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("episode already finished after {steps} steps")]
    EpisodeDone { steps: u32 },

    #[error("position ({row}, {col}) is not an interior cell")]
    NotInterior { row: usize, col: usize },

    #[error("start and goal must differ, both are ({row}, {col})")]
    StartIsGoal { row: usize, col: usize },

    #[error("cannot build instance set: {0}")]
    InfeasibleInstanceSet(String),

    #[error("mask size must be odd and at least 3, got {0}")]
    InvalidMaskSize(usize),

    #[error("grid side {got} does not match model side {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("forward context is stale or belongs to another model")]
    StaleContext,

    #[error("non-finite value during training at epoch {epoch}: {detail}")]
    NonFinite { epoch: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("at least one metrics row is required")]
    EmptyAggregate,
}

pub type Result<T> = std::result::Result<T, Error>;
