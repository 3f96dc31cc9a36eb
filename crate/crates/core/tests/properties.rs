//! Property tests against brute-force oracles.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use craftsim::agents::{parse_llm_output, random_policy, Observation, ParseTolerance};
use craftsim::env::{render_combination_line, EpisodeState, Task};
use craftsim::kgraph::{
    min_craft_depth, reachable_closure, scramble_semantics, ItemId, KnowledgeGraph, Pair, Recipe,
};

/// Item count plus raw (a, b, result) triples; later duplicates of a pair are dropped.
fn graph_strategy(max_items: u32) -> impl Strategy<Value = KnowledgeGraph> {
    (3..=max_items).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n, 0..n), 0..(3 * n as usize)).prop_map(
            move |triples| {
                let mut pairs = BTreeMap::new();
                for (a, b, r) in triples {
                    pairs
                        .entry(Pair::new(ItemId(a), ItemId(b)))
                        .or_insert(ItemId(r));
                }
                let names = (0..n).map(|i| format!("item{i:02}")).collect();
                let recipes = pairs
                    .into_iter()
                    .map(|(pair, result)| Recipe { pair, result });
                KnowledgeGraph::from_parts(names, recipes, [ItemId(0)]).unwrap()
            },
        )
    })
}

fn brute_empowerment(g: &KnowledgeGraph, item: u32) -> u32 {
    let n = g.item_count() as u32;
    let mut count = 0;
    for a in 0..n {
        for b in a..n {
            if (a == item || b == item) && g.combine(ItemId(a), ItemId(b)).unwrap().is_some() {
                count += 1;
            }
        }
    }
    count
}

/// Breadth-first search over held-item sets.
fn brute_depth(
    g: &KnowledgeGraph,
    seed: &BTreeSet<ItemId>,
    target: ItemId,
    cap: u32,
) -> Option<u32> {
    if seed.contains(&target) {
        return Some(0);
    }
    let mut frontier = vec![seed.clone()];
    for depth in 1..=cap {
        let mut next = BTreeSet::new();
        for held in &frontier {
            for &a in held {
                for &b in held.range(a..) {
                    if let Some(r) = g.combine(a, b).unwrap() {
                        if r == target {
                            return Some(depth);
                        }
                        if !held.contains(&r) {
                            let mut h = held.clone();
                            h.insert(r);
                            next.insert(h);
                        }
                    }
                }
            }
        }
        frontier = next.into_iter().collect();
    }
    None
}

fn brute_closure(g: &KnowledgeGraph, seed: &BTreeSet<ItemId>) -> BTreeSet<ItemId> {
    let mut held = seed.clone();
    loop {
        let mut grew = false;
        for a in held.clone() {
            for b in held.clone() {
                if let Some(r) = g.combine(a, b).unwrap() {
                    grew |= held.insert(r);
                }
            }
        }
        if !grew {
            return held;
        }
    }
}

fn name_strategy() -> impl Strategy<Value = String> {
    "[a-z]{1,8}( [a-z]{1,6})?( [a-z]{1,6})?"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn combine_is_symmetric(g in graph_strategy(20)) {
        let n = g.item_count() as u32;
        for a in 0..n {
            for b in 0..n {
                prop_assert_eq!(g.combine(ItemId(a), ItemId(b)).unwrap(), g.combine(ItemId(b), ItemId(a)).unwrap());
            }
        }
    }

    #[test]
    fn empowerment_matches_brute_force(g in graph_strategy(25)) {
        for i in 0..g.item_count() as u32 {
            prop_assert_eq!(g.empowerment(ItemId(i)).unwrap(), brute_empowerment(&g, i));
        }
    }

    #[test]
    fn min_depth_matches_search(g in graph_strategy(12), seed_bits in 1u32..(1 << 6), target in 0u32..12) {
        let n = g.item_count() as u32;
        let seed: BTreeSet<ItemId> = (0..n.min(6)).filter(|i| seed_bits & (1 << i) != 0).map(ItemId).collect();
        prop_assume!(!seed.is_empty());
        let target = ItemId(target % n);
        prop_assert_eq!(min_craft_depth(&g, &seed, target, 3).unwrap(), brute_depth(&g, &seed, target, 3));
    }

    #[test]
    fn closure_reaches_the_fixpoint(g in graph_strategy(15), seed_bits in 1u32..(1 << 4)) {
        let n = g.item_count() as u32;
        let seed: BTreeSet<ItemId> = (0..n.min(4)).filter(|i| seed_bits & (1 << i) != 0).map(ItemId).collect();
        prop_assume!(!seed.is_empty());
        let layers = reachable_closure(&g, &seed, 64).unwrap();
        prop_assert_eq!(layers.last().unwrap(), &brute_closure(&g, &seed));
        for w in layers.windows(2) {
            prop_assert!(w[0].is_subset(&w[1]));
        }
    }

    #[test]
    fn scramble_is_an_isomorphism(g in graph_strategy(20), seed in any::<u64>()) {
        let (sg, map) = scramble_semantics(&g, seed);
        let ids: Vec<ItemId> = g
            .items()
            .iter()
            .map(|it| sg.id_of(map.get(&it.name).unwrap()).unwrap())
            .collect();
        prop_assert!(g.is_isomorphic_under(&sg, &ids));
        prop_assert_eq!(
            g.base_items().iter().map(|b| ids[b.index()]).collect::<BTreeSet<_>>(),
            sg.base_items().clone()
        );
    }

    #[test]
    fn render_then_parse_recovers_the_pair(
        names in proptest::collection::btree_set(name_strategy(), 1..10),
        picks in (any::<prop::sample::Index>(), any::<prop::sample::Index>()),
    ) {
        let names: Vec<String> = names.into_iter().collect();
        let g = KnowledgeGraph::from_parts(names.clone(), [], [ItemId(0)]).unwrap();
        let a = ItemId(picks.0.index(names.len()) as u32);
        let b = ItemId(picks.1.index(names.len()) as u32);
        let pair = Pair::new(a, b);
        for tolerance in [ParseTolerance::Strict, ParseTolerance::Lenient] {
            let parsed = parse_llm_output(&render_combination_line(&g, pair), &names, tolerance).unwrap();
            let back = Pair::new(g.id_of(&parsed.first).unwrap(), g.id_of(&parsed.second).unwrap());
            prop_assert_eq!(back, pair);
        }
    }

    #[test]
    fn random_agent_never_repeats_while_pairs_remain(g in graph_strategy(10), seed in any::<u64>()) {
        let task = Task {
            task_id: "p".into(),
            initial_items: vec![ItemId(0), ItemId(1), ItemId(2)],
            target: None,
            horizon: 12,
            depth: None,
            distractors: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = EpisodeState::new(&g, &task);
        while !state.is_over() {
            let n = state.inventory_len();
            let untried = n * (n + 1) / 2 - state.attempt_count();
            let d = random_policy(&Observation { task: &task, state: &state, social: None }, &mut rng).unwrap();
            prop_assert_eq!(d.fallback_used, untried == 0);
            if untried > 0 {
                prop_assert!(!state.has_attempted(d.action));
            }
            if state.apply(&g, d.action).unwrap().kind == craftsim::env::OutcomeKind::RepeatedAttempt {
                state.consume_repeated_step().unwrap();
            }
        }
    }
}
