//! Consequence expansion and the adaptation to-do list.
//!
//! Every change goes through a [`Session`]. Deletes cascade automatically,
//! decisions the user has to make become [`Task`]s, and each command is
//! appended to a replayable log.

mod operation;
mod replay;
mod rules;
mod session;
mod task;

use thiserror::Error;

use crate::model::{ElementId, ModelError};

pub use operation::Operation;
pub use replay::{read_log, replay, write_log, LogHeader, LOG_SCHEMA};
pub use rules::{Consequence, Flavor};
pub(crate) use session::cascade_delete;
pub use session::{consequences_of, AutoStep, Command, LogRecord, ReviewItem, Session};
pub use task::{Check, Resolution, Task, TaskStatus};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("task `{0}` not found")]
    TaskNotFound(String),
    #[error("task `{id}` is {status}, not open")]
    TaskNotOpen { id: String, status: TaskStatus },
    #[error("a waiver needs a non-empty note")]
    EmptyNote,
    #[error("element `{0}` not found")]
    NotFound(ElementId),
    #[error("replay diverged at step {step}: {reason}")]
    Replay { step: usize, reason: String },
    #[error("invalid session log: {0}")]
    Log(String),
}
