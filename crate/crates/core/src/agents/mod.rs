//! Agent policies behind one interface: uniform random, empowerment-driven,
//! and chat-model backed.

mod baseline;
mod llm;
mod prompt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collective::SocialView;
use crate::env::{Action, EpisodeState, Task};
use crate::kgraph::KnowledgeGraph;
use crate::llm_client::ClientError;

pub use baseline::{empowered_policy, random_policy, EmpoweredPolicy, RandomPolicy};
pub use llm::{llm_policy, LlmPolicy};
pub use prompt::{
    build_llm_messages, parse_llm_output, ParseTolerance, ParsedOutput, PromptAssets,
};

/// What a policy sees when choosing one action.
#[derive(Clone, Copy, Debug)]
pub struct Observation<'a> {
    pub task: &'a Task,
    pub state: &'a EpisodeState,
    pub social: Option<&'a SocialView>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_reprompts: u32,
    pub max_tokens: u32,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            temperature: 1.0,
            top_p: 1.0,
            max_reprompts: 6,
            max_tokens: 256,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepromptReason {
    Repeated,
    Unparseable,
}

/// A rejected completion that triggered a corrective message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reprompt {
    pub reason: RepromptReason,
    pub raw: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decision {
    pub action: Action,
    pub reasoning: Option<String>,
    pub reprompts_used: u32,
    pub fallback_used: bool,
    pub reprompts: Vec<Reprompt>,
}

impl Decision {
    pub(crate) fn plain(action: Action, fallback_used: bool) -> Self {
        Decision {
            action,
            reasoning: None,
            reprompts_used: 0,
            fallback_used,
            reprompts: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("inventory is empty")]
    EmptyInventory,
    #[error("chat client: {0}")]
    Client(#[from] ClientError),
    /// A failure reproduced verbatim from a log.
    #[error("{0}")]
    Replayed(String),
}

/// One agent's decision rule. The graph is passed to every policy; only the
/// baselines read its recipes.
pub trait Policy: Send {
    fn decide(
        &mut self,
        g: &KnowledgeGraph,
        obs: &Observation<'_>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Decision, AgentError>;

    /// Whether neighbors' histories should be rendered into the observation.
    fn wants_social_view(&self) -> bool {
        false
    }

    fn name(&self) -> &'static str;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn decide(
        &mut self,
        g: &KnowledgeGraph,
        obs: &Observation<'_>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Decision, AgentError> {
        (**self).decide(g, obs, rng)
    }

    fn wants_social_view(&self) -> bool {
        (**self).wants_social_view()
    }

    fn name(&self) -> &'static str {
        (**self).name()
    }
}
