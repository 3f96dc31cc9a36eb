use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ClientFactory, RunConfig};
use super::metrics::MetricsSummary;
use super::runner::{prepare_tasks, run_with_tasks};
use super::RunError;
use crate::agents::{empowered_policy, Observation, PromptAssets};
use crate::env::{make_open_ended_task, EpisodeState, OutcomeKind};
use crate::kgraph::{normalize_name, scramble_semantics, KnowledgeGraph, Pair, ScrambleMap};
use crate::llm_client::{ChatClient, ChatMessage, ChatRequest};

pub struct SemanticsProbe {
    pub original: MetricsSummary,
    pub scrambled: MetricsSummary,
    pub map: ScrambleMap,
}

/// Runs one task batch on the graph and on a renamed copy with identical
/// structure and seeds.
pub fn probe_semantics(
    cfg: &RunConfig,
    g: &KnowledgeGraph,
    scramble_seed: u64,
    clients: Option<&dyn ClientFactory>,
    scrambled_clients: Option<&dyn ClientFactory>,
) -> Result<SemanticsProbe, RunError> {
    cfg.validate()?;
    let tasks = prepare_tasks(cfg, g)?;
    let (sg, map) = scramble_semantics(g, scramble_seed);
    let renamed = tasks
        .iter()
        .map(|t| {
            t.remap(g, &sg, |n| {
                map.get(n).expect("every item renamed").to_string()
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let original = run_with_tasks(cfg, g, tasks, clients)?.metrics;
    let scrambled = run_with_tasks(cfg, &sg, renamed, scrambled_clients)?.metrics;
    Ok(SemanticsProbe {
        original,
        scrambled,
        map,
    })
}

/// Similarity between a predicted and a true item name, in `[0, 1]`.
pub trait Scorer: Sync {
    fn score(&self, predicted: &str, truth: &str) -> f64;
    fn name(&self) -> &str;
}

/// 1 when the normalized names agree.
pub struct ExactMatch;

impl Scorer for ExactMatch {
    fn score(&self, predicted: &str, truth: &str) -> f64 {
        if normalize_name(predicted) == normalize_name(truth) {
            1.0
        } else {
            0.0
        }
    }

    fn name(&self) -> &str {
        "exact_match"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub first: String,
    pub second: String,
    pub truth: String,
    pub raw: String,
    pub predicted: Option<String>,
    pub score: f64,
    /// Reply could not be read as an item name.
    pub flagged: bool,
    pub baseline_guess: String,
    pub baseline_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub scorer: String,
    pub rows: Vec<PredictionRow>,
    pub mean_score: f64,
    /// Same scorer applied to a uniformly random item per combination.
    pub random_baseline_mean: f64,
    pub flagged: usize,
}

/// Reads `Result: 'name'`, or a reply that is only a quoted name.
pub fn parse_prediction(text: &str) -> Option<String> {
    let unquote = |s: &str| {
        let s = s.trim().trim_end_matches('.').trim();
        for q in ['\'', '"', '`'] {
            if let Some(inner) = s.strip_prefix(q).and_then(|r| r.strip_suffix(q)) {
                return Some(inner.to_string());
            }
        }
        None
    };
    for line in text.lines() {
        let l = line.trim().trim_matches('*');
        if l.get(..7)
            .is_some_and(|h| h.eq_ignore_ascii_case("result:"))
        {
            let rest = l[7..].trim().trim_matches('*').trim();
            let name = unquote(rest).unwrap_or_else(|| rest.trim_end_matches('.').to_string());
            let name = normalize_name(&name);
            return (!name.is_empty()).then_some(name);
        }
    }
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    match lines.as_slice() {
        [only] => unquote(only)
            .map(|n| normalize_name(&n))
            .filter(|n| !n.is_empty()),
        _ => None,
    }
}

/// Asks the model for the result of each valid combination.
pub fn probe_prediction(
    g: &KnowledgeGraph,
    combos: &[Pair],
    client: &dyn ChatClient,
    assets: &PromptAssets,
    model: &str,
    scorer: &dyn Scorer,
    rng: &mut ChaCha8Rng,
) -> Result<PredictionReport, RunError> {
    let mut rows = Vec::with_capacity(combos.len());
    for &pair in combos {
        let truth = g
            .combine_pair(pair)
            .ok_or_else(|| RunError::Config("prediction combos must be valid recipes".into()))?;
        let (first, second) = (g.name(pair.first()), g.name(pair.second()));
        let req = ChatRequest {
            messages: vec![ChatMessage::user(assets.prediction_message(first, second))],
            temperature: 0.0,
            top_p: 1.0,
            max_tokens: 32,
            model: model.to_string(),
        };
        let raw = client.complete(&req).map_err(RunError::from)?.content;
        let predicted = parse_prediction(&raw);
        let truth = g.name(truth).to_string();
        let score = predicted
            .as_deref()
            .map_or(0.0, |p| scorer.score(p, &truth));
        let guess = g.name(crate::kgraph::ItemId(
            rng.gen_range(0..g.item_count() as u32),
        ));
        rows.push(PredictionRow {
            first: first.to_string(),
            second: second.to_string(),
            baseline_score: scorer.score(guess, &truth),
            baseline_guess: guess.to_string(),
            flagged: predicted.is_none(),
            raw,
            predicted,
            score,
            truth,
        });
    }
    let n = rows.len().max(1) as f64;
    Ok(PredictionReport {
        scorer: scorer.name().to_string(),
        mean_score: rows.iter().map(|r| r.score).sum::<f64>() / n,
        random_baseline_mean: rows.iter().map(|r| r.baseline_score).sum::<f64>() / n,
        flagged: rows.iter().filter(|r| r.flagged).count(),
        rows,
    })
}

/// Distinct valid combinations discovered by empowered rollouts from the
/// graph's base items, in discovery order.
pub fn sample_combos_from_rollouts(
    g: &KnowledgeGraph,
    count: usize,
    horizon: u32,
    temperature: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Pair>, RunError> {
    let base: Vec<&str> = g.base_items().iter().map(|&i| g.name(i)).collect();
    let task = make_open_ended_task(g, &base, horizon)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut stale = 0;
    while out.len() < count && stale < 20 {
        let before = out.len();
        let mut s = EpisodeState::new(g, &task);
        while !s.is_over() {
            let obs = Observation {
                task: &task,
                state: &s,
                social: None,
            };
            let d = empowered_policy(g, &obs, temperature, rng)
                .map_err(|e| RunError::Config(e.to_string()))?;
            match s.apply(g, d.action)?.kind {
                OutcomeKind::NewItem(_) | OutcomeKind::DuplicateResult(_) => {
                    if seen.insert(d.action) && out.len() < count {
                        out.push(d.action);
                    }
                }
                OutcomeKind::RepeatedAttempt => s.consume_repeated_step()?,
                OutcomeKind::InvalidCombo => {}
            }
        }
        stale = if out.len() == before { stale + 1 } else { 0 };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_parsing() {
        assert_eq!(
            parse_prediction("Result: 'Steam'").as_deref(),
            Some("steam")
        );
        assert_eq!(
            parse_prediction("**Result:** steam.").as_deref(),
            Some("steam")
        );
        assert_eq!(parse_prediction("'steam'").as_deref(), Some("steam"));
        assert_eq!(parse_prediction("I think it makes steam, maybe"), None);
        assert_eq!(parse_prediction(""), None);
    }

    #[test]
    fn exact_match_normalizes() {
        assert_eq!(ExactMatch.score("Steam ", "steam"), 1.0);
        assert_eq!(ExactMatch.score("mud", "steam"), 0.0);
    }
}
