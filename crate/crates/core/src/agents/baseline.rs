use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{AgentError, Decision, Observation, Policy};
use crate::env::EpisodeState;
use crate::kgraph::{KnowledgeGraph, Pair};

/// Temperatures at or below this are treated as exact argmax.
const ARGMAX_TEMPERATURE: f64 = 1e-9;

fn pair_total(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Maps a flat index to inventory positions `(i, j)` with `i <= j`.
fn decode(n: usize, mut k: usize) -> (usize, usize) {
    for i in 0..n {
        let row = n - i;
        if k < row {
            return (i, i + k);
        }
        k -= row;
    }
    unreachable!("pair index out of range")
}

fn pair_at(state: &EpisodeState, n: usize, k: usize) -> Pair {
    let (i, j) = decode(n, k);
    Pair::new(state.item_at(i), state.item_at(j))
}

/// Uniform choice among the `count` inventory pairs accepted by `keep`.
/// Rejection sampling when they are dense, enumeration otherwise.
fn uniform_pair_where(
    state: &EpisodeState,
    count: usize,
    rng: &mut ChaCha8Rng,
    keep: impl Fn(Pair) -> bool,
) -> Pair {
    let n = state.inventory_len();
    let total = pair_total(n);
    debug_assert!(count > 0 && count <= total);
    if 2 * count >= total {
        loop {
            let p = pair_at(state, n, rng.gen_range(0..total));
            if keep(p) {
                return p;
            }
        }
    }
    let mut pick = rng.gen_range(0..count);
    for i in 0..n {
        for j in i..n {
            let p = Pair::new(state.item_at(i), state.item_at(j));
            if keep(p) {
                if pick == 0 {
                    return p;
                }
                pick -= 1;
            }
        }
    }
    unreachable!("fewer matching pairs than counted")
}

fn untried_count(state: &EpisodeState) -> usize {
    pair_total(state.inventory_len()).saturating_sub(state.attempt_count())
}

/// Uniform over untried inventory pairs; uniform over all pairs once none is left.
pub fn random_policy(obs: &Observation<'_>, rng: &mut ChaCha8Rng) -> Result<Decision, AgentError> {
    let state = obs.state;
    let n = state.inventory_len();
    if n == 0 {
        return Err(AgentError::EmptyInventory);
    }
    let untried = untried_count(state);
    if untried == 0 {
        let p = pair_at(state, n, rng.gen_range(0..pair_total(n)));
        return Ok(Decision::plain(p, true));
    }
    let p = uniform_pair_where(state, untried, rng, |p| !state.has_attempted(p));
    Ok(Decision::plain(p, false))
}

/// Untried valid pairs in inventory-position order with their scores.
fn scored_candidates(g: &KnowledgeGraph, state: &EpisodeState) -> Vec<(Pair, f64)> {
    let mut found: Vec<((usize, usize), Pair, f64)> = Vec::new();
    for i in 0..state.inventory_len() {
        let a = state.item_at(i);
        for &(b, result) in g.partners(a) {
            let Some(j) = state.position(b) else { continue };
            if j < i {
                continue;
            }
            let pair = Pair::new(a, b);
            if state.has_attempted(pair) {
                continue;
            }
            found.push(((i, j), pair, f64::from(g.empowerment_unchecked(result))));
        }
    }
    found.sort_by_key(|c| c.0);
    found.into_iter().map(|(_, p, s)| (p, s)).collect()
}

/// Softmax over untried pairs scored by their result's empowerment (invalid
/// pairs score 0). At temperature zero this is argmax with uniform ties.
pub fn empowered_policy(
    g: &KnowledgeGraph,
    obs: &Observation<'_>,
    temperature: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Decision, AgentError> {
    let state = obs.state;
    if state.inventory_len() == 0 {
        return Err(AgentError::EmptyInventory);
    }
    let untried = untried_count(state);
    if untried == 0 {
        return random_policy(obs, rng);
    }
    let valid = scored_candidates(g, state);
    let invalid = untried - valid.len();
    let max = valid
        .iter()
        .map(|c| c.1)
        .chain((invalid > 0).then_some(0.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let pick_invalid = |rng: &mut ChaCha8Rng| {
        uniform_pair_where(state, invalid, rng, |p| {
            !state.has_attempted(p) && g.combine_pair(p).is_none()
        })
    };

    if temperature <= ARGMAX_TEMPERATURE {
        let best: Vec<Pair> = valid.iter().filter(|c| c.1 == max).map(|c| c.0).collect();
        let tied_invalid = if max == 0.0 { invalid } else { 0 };
        let k = rng.gen_range(0..best.len() + tied_invalid);
        let action = match best.get(k) {
            Some(&p) => p,
            None => pick_invalid(rng),
        };
        return Ok(Decision::plain(action, false));
    }

    let weights: Vec<f64> = valid
        .iter()
        .map(|c| ((c.1 - max) / temperature).exp())
        .collect();
    let invalid_mass = invalid as f64 * (-max / temperature).exp();
    let total: f64 = weights.iter().sum::<f64>() + invalid_mass;
    let mut u = rng.gen::<f64>() * total;
    for (c, w) in valid.iter().zip(&weights) {
        if u < *w {
            return Ok(Decision::plain(c.0, false));
        }
        u -= w;
    }
    if invalid > 0 {
        Ok(Decision::plain(pick_invalid(rng), false))
    } else {
        // rounding left u past the last weight
        Ok(Decision::plain(valid[valid.len() - 1].0, false))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn decide(
        &mut self,
        _g: &KnowledgeGraph,
        obs: &Observation<'_>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Decision, AgentError> {
        random_policy(obs, rng)
    }

    fn name(&self) -> &'static str {
        "random"
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EmpoweredPolicy {
    pub temperature: f64,
}

impl Policy for EmpoweredPolicy {
    fn decide(
        &mut self,
        g: &KnowledgeGraph,
        obs: &Observation<'_>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Decision, AgentError> {
        empowered_policy(g, obs, self.temperature, rng)
    }

    fn name(&self) -> &'static str {
        "empowered"
    }
}
