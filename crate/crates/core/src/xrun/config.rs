use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::RunError;
use crate::agents::{
    EmpoweredPolicy, LlmPolicy, ParseTolerance, Policy, PromptAssets, RandomPolicy, SamplingConfig,
};
use crate::collective::TopologySpec;
use crate::kgraph::{standin, KnowledgeGraph};
use crate::llm_client::{
    record_transcript, replay_transcript, ChatClient, ClientError, HeuristicClient, HttpChatClient,
    HttpConfig,
};

/// Graph reference that resolves to the built-in stand-in graph.
pub const BUILTIN_STANDIN: &str = "builtin:la2-standin";

fn default_empowered_temperature() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

fn default_size() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    Targeted {
        depth: u32,
        distractors: u32,
        tasks_per_trial: u32,
        horizon: u32,
    },
    OpenEnded {
        initial: Vec<String>,
        horizon: u32,
    },
}

impl TaskSpec {
    pub fn horizon(&self) -> u32 {
        match self {
            TaskSpec::Targeted { horizon, .. } | TaskSpec::OpenEnded { horizon, .. } => *horizon,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec {
    Random,
    Empowered {
        #[serde(default = "default_empowered_temperature")]
        temperature: f64,
    },
    Llm {
        #[serde(default)]
        sampling: SamplingConfig,
        #[serde(default)]
        model: String,
        #[serde(default)]
        tolerance: ParseTolerance,
        /// Render neighbors' histories into the prompt.
        #[serde(default = "default_true")]
        social: bool,
        /// Expected hash of the prompt assets; checked when present.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prompt_hash: Option<String>,
    },
}

impl AgentSpec {
    pub fn label(&self) -> &'static str {
        match self {
            AgentSpec::Random => "random",
            AgentSpec::Empowered { .. } => "empowered",
            AgentSpec::Llm { .. } => "llm",
        }
    }

    pub fn is_llm(&self) -> bool {
        matches!(self, AgentSpec::Llm { .. })
    }

    pub(crate) fn build(
        &self,
        client: Option<Arc<dyn ChatClient>>,
    ) -> Result<Box<dyn Policy>, RunError> {
        Ok(match self {
            AgentSpec::Random => Box::new(RandomPolicy),
            AgentSpec::Empowered { temperature } => Box::new(EmpoweredPolicy {
                temperature: *temperature,
            }),
            AgentSpec::Llm {
                sampling,
                model,
                tolerance,
                social,
                ..
            } => Box::new(LlmPolicy {
                client: client.ok_or_else(|| {
                    RunError::Config("llm agents need a chat client backend".into())
                })?,
                assets: PromptAssets::default(),
                sampling: *sampling,
                model: model.clone(),
                tolerance: *tolerance,
                social: *social,
            }),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    #[serde(default = "default_size")]
    pub size: usize,
    #[serde(default = "default_topology")]
    pub topology: TopologySpec,
    #[serde(default)]
    pub copy_mechanism: bool,
}

fn default_topology() -> TopologySpec {
    TopologySpec::FullyConnected
}

impl Default for GroupSpec {
    fn default() -> Self {
        GroupSpec {
            size: 1,
            topology: TopologySpec::FullyConnected,
            copy_mechanism: false,
        }
    }
}

/// One experiment. Together with the graph bytes (and transcripts, for chat
/// agents) it fixes every logged byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Recipe file path, or [`BUILTIN_STANDIN`].
    pub graph: String,
    pub task: TaskSpec,
    pub agent: AgentSpec,
    #[serde(default)]
    pub group: GroupSpec,
    pub trials: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl RunConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self, RunError> {
        let cfg: RunConfig =
            serde_json::from_slice(bytes).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RunError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)
            .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&bytes)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hash of the compact JSON form; stamped into every log header.
    pub fn content_hash(&self) -> String {
        crate::util::sha256_hex(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        )
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.task.horizon() == 0 {
            return bad("horizon must be positive".into());
        }
        if let TaskSpec::OpenEnded { initial, .. } = &self.task {
            if initial.is_empty() {
                return bad("open-ended task needs initial items".into());
            }
        }
        if self.group.size == 0 {
            return bad("group size must be positive".into());
        }
        match &self.agent {
            AgentSpec::Empowered { temperature } if temperature.is_nan() || *temperature < 0.0 => {
                return bad(format!("temperature {temperature} must be non-negative"));
            }
            AgentSpec::Llm {
                sampling,
                prompt_hash,
                ..
            } => {
                if sampling.temperature.is_nan()
                    || sampling.temperature < 0.0
                    || !(0.0..=1.0).contains(&sampling.top_p)
                    || sampling.top_p == 0.0
                {
                    return bad("sampling needs temperature >= 0 and top_p in (0, 1]".into());
                }
                let shipped = PromptAssets::default().hash();
                if let Some(h) = prompt_hash {
                    if *h != shipped {
                        return bad(format!(
                            "prompt hash {h} does not match shipped assets {shipped}"
                        ));
                    }
                }
            }
            _ => {}
        }
        crate::collective::GroupTopology::new(self.group.size, self.group.topology.clone())
            .map_err(|e| RunError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn load_graph(&self) -> Result<KnowledgeGraph, RunError> {
        load_graph(&self.graph)
    }
}

pub fn load_graph(reference: &str) -> Result<KnowledgeGraph, RunError> {
    if reference == BUILTIN_STANDIN {
        return Ok(standin::la2_standin());
    }
    KnowledgeGraph::load_path(reference).map_err(RunError::Graph)
}

/// Supplies one chat client per (trial, agent).
pub trait ClientFactory: Sync {
    fn client(&self, trial: u32, agent: usize) -> Result<Arc<dyn ChatClient>, ClientError>;
}

/// Where chat completions come from at run time. Not part of [`RunConfig`]:
/// a recorded run and its replay share one config.
#[derive(Clone, Debug)]
pub enum LlmBackend {
    Http(HttpConfig),
    /// Offline stand-in model, seeded.
    Heuristic {
        seed: u64,
    },
    /// Transcripts previously recorded into this directory.
    Replay {
        dir: PathBuf,
    },
}

pub fn transcript_path(dir: &Path, trial: u32, agent: usize) -> PathBuf {
    dir.join(format!("trial{trial:03}-agent{agent:02}.jsonl"))
}

/// Builds clients from a backend, optionally recording every exchange.
pub struct BackendFactory {
    pub backend: LlmBackend,
    pub record_dir: Option<PathBuf>,
}

impl ClientFactory for BackendFactory {
    fn client(&self, trial: u32, agent: usize) -> Result<Arc<dyn ChatClient>, ClientError> {
        let live: Arc<dyn ChatClient> = match &self.backend {
            LlmBackend::Http(cfg) => Arc::new(HttpChatClient::new(cfg.clone())?),
            LlmBackend::Heuristic { seed } => Arc::new(HeuristicClient::new(*seed)),
            LlmBackend::Replay { dir } => {
                return Ok(Arc::new(replay_transcript(transcript_path(
                    dir, trial, agent,
                ))?))
            }
        };
        match &self.record_dir {
            Some(dir) => Ok(Arc::new(record_transcript(
                live,
                transcript_path(dir, trial, agent),
            )?)),
            None => Ok(live),
        }
    }
}
