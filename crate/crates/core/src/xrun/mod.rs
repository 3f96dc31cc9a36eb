//! Experiment layer: run configs, seeded trial execution, JSONL event logs,
//! replay, metrics, probes, and report tables.

mod config;
mod log;
mod metrics;
mod probes;
mod replay;
mod report;
mod runner;

use thiserror::Error;

use crate::collective::TopologyError;
use crate::env::EnvError;
use crate::kgraph::GraphError;
use crate::llm_client::ClientError;

pub use config::{
    load_graph, transcript_path, AgentSpec, BackendFactory, ClientFactory, GroupSpec, LlmBackend,
    RunConfig, TaskSpec, BUILTIN_STANDIN,
};
pub use log::{EventLog, Header, OutcomeLabel, Record, VisitKind, LOG_FORMAT};
pub use metrics::{
    compute_metrics, CopyTimeStats, FinalInventory, MetricsSummary, RepromptStats, SuccessStats,
};
pub use probes::{
    parse_prediction, probe_prediction, probe_semantics, sample_combos_from_rollouts, ExactMatch,
    PredictionReport, PredictionRow, Scorer, SemanticsProbe,
};
pub use replay::replay_log;
pub use report::{report, Report};
pub use runner::{make_header, prepare_tasks, run_experiment, run_with_tasks, RunOutput};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("logs are not comparable: {0}")]
    MixedLogs(String),
    #[error("replay: {0}")]
    Replay(String),
}

impl RunError {
    /// True for errors caused by user input rather than execution.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            RunError::Config(_) | RunError::Graph(_) | RunError::MixedLogs(_)
        )
    }
}
