use std::collections::HashSet;

use super::GroupTopology;
use crate::env::EpisodeState;
use crate::kgraph::{ItemId, Pair};

/// Neighbors' attempt histories as shown to an agent.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SocialView {
    pub others_valid: Vec<(Pair, ItemId)>,
    pub others_invalid: Vec<Pair>,
}

impl SocialView {
    pub fn is_empty(&self) -> bool {
        self.others_valid.is_empty() && self.others_invalid.is_empty()
    }
}

/// Union of current neighbors' full histories, minus pairs the agent tried
/// itself, deduplicated and ordered by discovery step (ties by agent id).
pub fn social_view(states: &[EpisodeState], topo: &GroupTopology, agent: usize) -> SocialView {
    let own = &states[agent];
    // (step, agent, is_invalid, pair, result)
    let mut entries: Vec<(u32, usize, bool, Pair, Option<ItemId>)> = Vec::new();
    for b in topo.neighbors(agent) {
        let s = &states[b];
        entries.extend(
            s.valid_attempts()
                .iter()
                .map(|a| (a.step, b, false, a.pair, Some(a.result))),
        );
        entries.extend(
            s.invalid_attempts()
                .iter()
                .map(|a| (a.step, b, true, a.pair, None)),
        );
    }
    entries.sort_by_key(|&(step, b, invalid, pair, _)| (step, b, invalid, pair));
    let mut seen = HashSet::new();
    let mut view = SocialView::default();
    for (_, _, _, pair, result) in entries {
        if own.has_attempted(pair) || !seen.insert(pair) {
            continue;
        }
        match result {
            Some(r) => view.others_valid.push((pair, r)),
            None => view.others_invalid.push(pair),
        }
    }
    view
}
