use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use super::{
    build_llm_messages, parse_llm_output, random_policy, AgentError, Decision, Observation,
    ParseTolerance, Policy, PromptAssets, Reprompt, RepromptReason, SamplingConfig,
};
use crate::kgraph::{KnowledgeGraph, Pair};
use crate::llm_client::{ChatClient, ChatMessage, ChatRequest};

/// Queries the model, re-prompting on repeated or unreadable answers.
///
/// Up to `cfg.max_reprompts` corrective messages are appended to the same
/// conversation. When the budget runs out the last readable (repeated) pair is
/// returned with `fallback_used`; if nothing was readable a random untried
/// pair is drawn from `rng`.
#[allow(clippy::too_many_arguments)]
pub fn llm_policy(
    client: &dyn ChatClient,
    g: &KnowledgeGraph,
    assets: &PromptAssets,
    obs: &Observation<'_>,
    cfg: &SamplingConfig,
    model: &str,
    tolerance: ParseTolerance,
    rng: &mut ChaCha8Rng,
) -> Result<Decision, AgentError> {
    let inventory: Vec<String> = obs
        .state
        .inventory()
        .map(|i| g.name(i).to_string())
        .collect();
    let mut messages = build_llm_messages(g, &assets.intro, obs);
    let mut reprompts = Vec::new();
    let mut last_repeat: Option<(Pair, Option<String>)> = None;
    for attempt in 0..=cfg.max_reprompts {
        let req = ChatRequest {
            messages: messages.clone(),
            temperature: cfg.temperature,
            top_p: cfg.top_p,
            max_tokens: cfg.max_tokens,
            model: model.to_string(),
        };
        let raw = client.complete(&req)?.content;
        let parsed = parse_llm_output(&raw, &inventory, tolerance).and_then(|p| {
            let pair = Pair::new(g.id_of(&p.first)?, g.id_of(&p.second)?);
            Some((pair, p.reasoning))
        });
        let (reason, corrective) = match parsed {
            Some((pair, reasoning)) if !obs.state.has_attempted(pair) => {
                return Ok(Decision {
                    action: pair,
                    reasoning,
                    reprompts_used: attempt,
                    fallback_used: false,
                    reprompts,
                });
            }
            Some((pair, reasoning)) => {
                let text = assets.repeat_message(g.name(pair.first()), g.name(pair.second()));
                last_repeat = Some((pair, reasoning));
                (RepromptReason::Repeated, text)
            }
            None => (RepromptReason::Unparseable, assets.format.clone()),
        };
        if attempt == cfg.max_reprompts {
            break;
        }
        reprompts.push(Reprompt {
            reason,
            raw: raw.clone(),
        });
        messages.push(ChatMessage::assistant(raw));
        messages.push(ChatMessage::user(corrective));
    }
    let reprompts_used = reprompts.len() as u32;
    let mut decision = match last_repeat {
        Some((action, reasoning)) => Decision {
            action,
            reasoning,
            ..Decision::plain(action, true)
        },
        None => Decision::plain(random_policy(obs, rng)?.action, true),
    };
    decision.reprompts_used = reprompts_used;
    decision.reprompts = reprompts;
    Ok(decision)
}

/// Chat-model agent. Sees neighbors' histories when a social view is offered.
pub struct LlmPolicy {
    pub client: Arc<dyn ChatClient>,
    pub assets: PromptAssets,
    pub sampling: SamplingConfig,
    pub model: String,
    pub tolerance: ParseTolerance,
    pub social: bool,
}

impl Policy for LlmPolicy {
    fn decide(
        &mut self,
        g: &KnowledgeGraph,
        obs: &Observation<'_>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Decision, AgentError> {
        llm_policy(
            self.client.as_ref(),
            g,
            &self.assets,
            obs,
            &self.sampling,
            &self.model,
            self.tolerance,
            rng,
        )
    }

    fn wants_social_view(&self) -> bool {
        self.social
    }

    fn name(&self) -> &'static str {
        "llm"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_open_ended_task, EpisodeState, Task};
    use crate::kgraph::test_graph;
    use crate::llm_client::{ChatResponse, ClientError};
    use rand::SeedableRng;
    use std::sync::Mutex;
    use std::time::Duration;

    /// Returns canned replies in order and keeps every request.
    struct Canned {
        replies: Mutex<Vec<&'static str>>,
        seen: Mutex<Vec<ChatRequest>>,
    }

    impl Canned {
        fn new(mut replies: Vec<&'static str>) -> Self {
            replies.reverse();
            Canned {
                replies: Mutex::new(replies),
                seen: Mutex::new(Vec::new()),
            }
        }
    }

    impl ChatClient for Canned {
        fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ClientError> {
            self.seen.lock().unwrap().push(req.clone());
            let content = self
                .replies
                .lock()
                .unwrap()
                .pop()
                .ok_or(ClientError::TranscriptExhausted { calls: 0 })?
                .to_string();
            Ok(ChatResponse {
                content,
                usage: None,
                latency: Duration::ZERO,
            })
        }
    }

    fn setup() -> (KnowledgeGraph, Task, EpisodeState) {
        let g = test_graph(
            &["fire", "water", "earth", "steam"],
            &[("fire", "water", "steam")],
        );
        let t = make_open_ended_task(&g, &["fire", "water", "earth"], 10).unwrap();
        let mut s = EpisodeState::new(&g, &t);
        let (f, e) = (g.id_of("fire").unwrap(), g.id_of("earth").unwrap());
        s.apply(&g, Pair::new(f, e)).unwrap();
        (g, t, s)
    }

    fn run(client: &Canned, max_reprompts: u32) -> Result<Decision, AgentError> {
        let (g, t, s) = setup();
        let obs = Observation {
            task: &t,
            state: &s,
            social: None,
        };
        let cfg = SamplingConfig {
            max_reprompts,
            ..SamplingConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        llm_policy(
            client,
            &g,
            &PromptAssets::default(),
            &obs,
            &cfg,
            "m",
            ParseTolerance::Lenient,
            &mut rng,
        )
    }

    #[test]
    fn fresh_pair_needs_no_reprompt() {
        let c = Canned::new(vec!["Combination: 'fire' and 'water'\nReasoning: steam"]);
        let d = run(&c, 6).unwrap();
        assert_eq!(d.reprompts_used, 0);
        assert!(!d.fallback_used);
        assert_eq!(d.reasoning.as_deref(), Some("steam"));
    }

    #[test]
    fn repeated_pair_exhausts_budget() {
        let c = Canned::new(vec!["Combination: 'earth' and 'fire'"; 7]);
        let d = run(&c, 6).unwrap();
        assert!(d.fallback_used);
        assert_eq!(d.reprompts_used, 6);
        assert!(d
            .reprompts
            .iter()
            .all(|r| r.reason == RepromptReason::Repeated));
        let seen = c.seen.lock().unwrap();
        assert_eq!(seen.len(), 7);
        assert_eq!(seen[6].messages.len(), 2 + 2 * 6);
        assert!(seen[1].messages[3].content.contains("'earth' and 'fire'"));
    }

    #[test]
    fn garbage_then_valid() {
        let c = Canned::new(vec![
            "hmm",
            "Combination: dragon and fire",
            "Combination: earth and water",
        ]);
        let d = run(&c, 6).unwrap();
        assert_eq!(d.reprompts_used, 2);
        assert!(!d.fallback_used);
        assert!(d
            .reprompts
            .iter()
            .all(|r| r.reason == RepromptReason::Unparseable));
    }

    #[test]
    fn never_readable_falls_back_to_untried_pair() {
        let c = Canned::new(vec!["no idea"; 3]);
        let d = run(&c, 2).unwrap();
        assert!(d.fallback_used);
        let (_, _, s) = setup();
        assert!(!s.has_attempted(d.action));
        assert!(s.holds(d.action.first()) && s.holds(d.action.second()));
    }

    #[test]
    fn client_failure_is_an_error() {
        let c = Canned::new(vec![]);
        assert!(matches!(run(&c, 6), Err(AgentError::Client(_))));
    }
}
