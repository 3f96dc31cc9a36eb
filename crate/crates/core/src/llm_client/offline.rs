use std::collections::HashSet;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ChatClient, ChatRequest, ChatResponse, ClientError, Role};

/// Offline stand-in for a chat model, for dry runs and record/replay tests.
///
/// It reads the inventory and attempt lists back out of the last state block
/// and proposes an untried pair chosen by a hash of the request, so its
/// output is a pure function of the conversation. Prediction prompts get an
/// inventory-free guess.
pub struct HeuristicClient {
    seed: u64,
}

impl HeuristicClient {
    pub fn new(seed: u64) -> Self {
        HeuristicClient { seed }
    }
}

fn quoted_names(list: &str) -> Vec<String> {
    list.split(", ")
        .map(|s| s.trim().trim_matches('\'').to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

fn tried_pairs(list: &str) -> Vec<(String, String)> {
    list.split(", ")
        .filter_map(|entry| {
            let lhs = entry.split(" -> ").next()?;
            let (a, b) = lhs.split_once(" and ")?;
            Some(pair_key(
                a.trim().trim_matches('\''),
                b.trim().trim_matches('\''),
            ))
        })
        .collect()
}

impl ChatClient for HeuristicClient {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ClientError> {
        req.validate()?;
        let digest = req.fingerprint();
        let mix = u64::from_str_radix(&digest[..16], 16).expect("hex digest");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ mix);
        let state = req
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User && m.content.contains("Inventory:"))
            .map(|m| m.content.as_str());
        let Some(state) = state else {
            return Ok(reply("Result: 'unknown'".into()));
        };
        let mut inventory = Vec::new();
        let mut tried: HashSet<(String, String)> = HashSet::new();
        for line in state.lines() {
            if let Some(rest) = line.strip_prefix("Inventory:") {
                inventory = quoted_names(rest);
            } else if let Some(rest) = line
                .strip_prefix("Task valid combinations:")
                .or_else(|| line.strip_prefix("Task invalid combinations:"))
            {
                tried.extend(tried_pairs(rest));
            }
        }
        let mut options = Vec::new();
        for (i, a) in inventory.iter().enumerate() {
            for b in &inventory[i..] {
                if !tried.contains(&pair_key(a, b)) {
                    options.push((a.clone(), b.clone()));
                }
            }
        }
        let text = match options.choose(&mut rng) {
            Some((a, b)) => {
                format!("Combination: '{a}' and '{b}'\nReasoning: I have not tried this pair yet.")
            }
            None => "I have tried everything.".to_string(),
        };
        Ok(reply(text))
    }
}

fn reply(content: String) -> ChatResponse {
    ChatResponse {
        content,
        usage: None,
        latency: Duration::ZERO,
    }
}
