//! Gridworld extrapolation testbed.
//!
//! A 7x7 walled Gridworld, absolute and ego-centric object grids, three
//! embedding-plus-linear heads (full, rotational wedge, mirror octant),
//! Q-learning and REINFORCE learners with game-level replay, and the
//! metrics used to judge how policies carry over to goals never rewarded
//! during training.

pub mod checkpoint;
pub mod encoding;
pub mod error;
pub mod evaluation;
pub mod gridworld;
pub mod model;
pub mod optim;
pub mod training;
pub mod verify;

pub use checkpoint::Checkpoint;
pub use encoding::{EmbeddingTable, Object, ObjectGrid, Representation};
pub use error::{Error, Result};
pub use evaluation::{aggregate_runs, evaluate_policy, MetricsRow, WrongMassScope};
pub use gridworld::{Action, GameInstance, InstanceSet, Position};
pub use model::{HeadKind, Model, ModelOutput};
pub use training::{run_training, Method, TrainConfig, TrainingOutcome};
