//! Episode engine: tasks, per-agent episode state, the step function, and
//! the textual task-state block shown to language-model agents.

mod render;
mod state;
mod task;

use thiserror::Error;

use crate::kgraph::{GraphError, ItemId};

pub use render::{render_combination_line, render_pair, render_state_prompt, CURRENT_TASK_HEADER};
pub use state::{
    step, Acquisition, Action, EpisodeState, InvalidAttempt, OutcomeKind, Source, StepOutcome,
    ValidAttempt,
};
pub use task::{
    is_success, make_open_ended_task, read_task_batch, sample_targeted_task, write_task_batch,
    TargetedSpec, Task, TaskRecord, TaskSampler, MAX_SAMPLING_RETRIES,
};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("action item {0} is not in the inventory")]
    NotInInventory(ItemId),
    #[error("episode is over (step {step} of {horizon})")]
    EpisodeOver { step: u32, horizon: u32 },
    #[error("success is undefined for open-ended tasks")]
    OpenEnded,
    #[error("unknown item names: {0:?}")]
    UnknownItems(Vec<String>),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("could not sample a depth-{depth} task with {distractors} distractors after {retries} attempts")]
    GenerationFailed {
        depth: u32,
        distractors: u32,
        retries: u32,
    },
    #[error("task batch i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("task batch json: {0}")]
    Json(#[from] serde_json::Error),
}
