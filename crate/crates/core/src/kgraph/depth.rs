use std::collections::{BTreeSet, HashSet};

use super::{GraphError, ItemId, KnowledgeGraph};

/// Hard cap on the exact depth search.
pub const MAX_DEPTH_CAP: u32 = 4;

/// Parallel closure layers: `layer[k + 1]` adds every result craftable from a
/// pair inside `layer[k]`. Stops after `max_steps` layers or at the first
/// layer equal to its predecessor.
pub fn reachable_closure(
    g: &KnowledgeGraph,
    seed: &BTreeSet<ItemId>,
    max_steps: usize,
) -> Result<Vec<BTreeSet<ItemId>>, GraphError> {
    if seed.is_empty() {
        return Err(GraphError::EmptySeed);
    }
    for &s in seed {
        g.check_id(s)?;
    }
    let mut present = vec![false; g.item_count()];
    for s in seed {
        present[s.index()] = true;
    }
    let mut layers = vec![seed.clone()];
    for _ in 0..max_steps {
        let current = layers.last().expect("seed layer");
        let mut next = current.clone();
        for &item in current {
            for &(partner, result) in g.partners(item) {
                if present[partner.index()] {
                    next.insert(result);
                }
            }
        }
        for n in &next {
            present[n.index()] = true;
        }
        let fixpoint = next.len() == current.len();
        layers.push(next);
        if fixpoint {
            break;
        }
    }
    Ok(layers)
}

/// Minimal number of sequential crafting steps (one new item per step) that
/// puts `target` in hand starting from `seed`, or `None` beyond `cap`.
///
/// `cap` is clamped to [`MAX_DEPTH_CAP`]. A target already in `seed` has depth 0.
pub fn min_craft_depth(
    g: &KnowledgeGraph,
    seed: &BTreeSet<ItemId>,
    target: ItemId,
    cap: u32,
) -> Result<Option<u32>, GraphError> {
    g.check_id(target)?;
    for &s in seed {
        g.check_id(s)?;
    }
    if seed.contains(&target) {
        return Ok(Some(0));
    }
    let cap = cap.min(MAX_DEPTH_CAP);
    let mut search = DepthSearch {
        g,
        target,
        present: vec![false; g.item_count()],
        held: seed.iter().copied().collect(),
        dead: HashSet::new(),
    };
    for &s in seed {
        search.present[s.index()] = true;
    }
    for depth in 1..=cap {
        if search.reachable_within(depth) {
            return Ok(Some(depth));
        }
    }
    Ok(None)
}

struct DepthSearch<'g> {
    g: &'g KnowledgeGraph,
    target: ItemId,
    present: Vec<bool>,
    held: Vec<ItemId>,
    // (sorted held set, remaining steps) already shown to fail
    dead: HashSet<(Vec<ItemId>, u32)>,
}

impl DepthSearch<'_> {
    fn craftable(&self) -> BTreeSet<ItemId> {
        let mut out = BTreeSet::new();
        for &item in &self.held {
            for &(partner, result) in self.g.partners(item) {
                if self.present[partner.index()] && !self.present[result.index()] {
                    out.insert(result);
                }
            }
        }
        out
    }

    /// Parallel-closure bound: sequential crafting never beats it.
    fn closure_reaches(&self, steps: u32) -> bool {
        let mut present = self.present.clone();
        let mut frontier: Vec<ItemId> = self.held.clone();
        for _ in 0..steps {
            let mut added = Vec::new();
            for &item in &frontier {
                for &(partner, result) in self.g.partners(item) {
                    if present[partner.index()] && !present[result.index()] {
                        added.push(result);
                    }
                }
            }
            if added.is_empty() {
                return false;
            }
            for &a in &added {
                present[a.index()] = true;
            }
            if present[self.target.index()] {
                return true;
            }
            frontier.extend(added);
        }
        present[self.target.index()]
    }

    fn reachable_within(&mut self, remaining: u32) -> bool {
        let next = self.craftable();
        if next.contains(&self.target) {
            return true;
        }
        if remaining <= 1 || !self.closure_reaches(remaining) {
            return false;
        }
        let mut key: Vec<ItemId> = self.held.clone();
        key.sort_unstable();
        let key = (key, remaining);
        if self.dead.contains(&key) {
            return false;
        }
        for item in next {
            self.present[item.index()] = true;
            self.held.push(item);
            let found = self.reachable_within(remaining - 1);
            self.held.pop();
            self.present[item.index()] = false;
            if found {
                return true;
            }
        }
        self.dead.insert(key);
        false
    }
}
