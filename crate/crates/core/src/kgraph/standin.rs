//! Deterministic stand-in for the Little Alchemy 2 recipe graph.
//!
//! The game's recipe data is not redistributable, so experiments that need
//! an LA2-scale graph use this generator: 720 items, the game's four base
//! elements, a small hand-written core of well-known first-tier recipes, and
//! a preferential-attachment extension where each new item gets a geometric
//! number of recipes (mean 4.8, giving roughly 3450 combinations) built from
//! earlier items. Every item is reachable from the base set.
//!
//! Load the real data through [`super::convert_wordcraft`] when it is at hand.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ItemId, KnowledgeGraph, Pair, Recipe};

pub const LA2_ITEM_COUNT: usize = 720;
pub const STANDIN_SEED: u64 = 20_240_301;
pub const BASE_ELEMENTS: [&str; 4] = ["air", "earth", "fire", "water"];
const MEAN_RECIPES_PER_ITEM: f64 = 4.8;

// result, ingredient pairs; every ingredient appears earlier in the list
const CORE: &[(&str, &[(&str, &str)])] = &[
    ("pressure", &[("air", "air")]),
    ("energy", &[("air", "fire"), ("fire", "fire")]),
    ("dust", &[("air", "earth")]),
    ("mist", &[("air", "water")]),
    ("land", &[("earth", "earth")]),
    ("lava", &[("earth", "fire")]),
    ("mud", &[("earth", "water")]),
    ("steam", &[("fire", "water")]),
    ("puddle", &[("water", "water")]),
    ("wind", &[("air", "energy"), ("air", "pressure")]),
    ("stone", &[("earth", "pressure"), ("air", "lava")]),
    ("pond", &[("puddle", "water")]),
    ("lake", &[("pond", "water")]),
    ("sea", &[("lake", "water")]),
    ("ocean", &[("sea", "water")]),
    ("volcano", &[("earth", "lava")]),
    ("cloud", &[("air", "steam"), ("air", "mist")]),
    ("rain", &[("cloud", "water")]),
    ("plant", &[("earth", "rain")]),
    ("sand", &[("air", "stone"), ("stone", "wind")]),
    ("glass", &[("fire", "sand")]),
    ("metal", &[("fire", "stone")]),
    ("obsidian", &[("lava", "water")]),
    ("brick", &[("fire", "mud")]),
    ("wall", &[("brick", "brick")]),
    ("house", &[("wall", "wall")]),
    ("swamp", &[("mud", "plant")]),
    ("life", &[("energy", "swamp")]),
    ("continent", &[("land", "land")]),
    ("planet", &[("continent", "continent")]),
    ("grass", &[("earth", "plant")]),
    ("garden", &[("plant", "plant")]),
    ("tree", &[("land", "plant")]),
    ("clay", &[("mud", "sand")]),
    ("bacteria", &[("life", "swamp")]),
    ("animal", &[("land", "life")]),
    ("human", &[("clay", "life")]),
    ("tool", &[("human", "metal")]),
    ("wood", &[("tool", "tree")]),
    ("boiler", &[("metal", "steam")]),
    ("electricity", &[("energy", "metal")]),
    ("storm", &[("cloud", "energy")]),
    ("lightning", &[("energy", "storm")]),
];

const ONSETS: &[&str] = &[
    "b", "br", "c", "d", "dr", "f", "g", "gl", "h", "k", "l", "m", "n", "p", "pl", "r", "s", "st",
    "t", "tr", "v", "z",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: &[&str] = &["", "", "n", "r", "l", "m", "s", "x"];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS[rng.gen_range(0..ONSETS.len())]);
        w.push_str(VOWELS[rng.gen_range(0..VOWELS.len())]);
    }
    w.push_str(CODAS[rng.gen_range(0..CODAS.len())]);
    w
}

/// The default LA2-scale stand-in graph.
pub fn la2_standin() -> KnowledgeGraph {
    generate(STANDIN_SEED, LA2_ITEM_COUNT)
}

/// Generates a stand-in graph with `item_count` items (at least the four
/// base elements). Ids follow sorted-name order like any loaded graph.
pub fn generate(seed: u64, item_count: usize) -> KnowledgeGraph {
    let item_count = item_count.max(BASE_ELEMENTS.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // creation-order index -> name
    let mut names: Vec<String> = BASE_ELEMENTS.iter().map(|s| s.to_string()).collect();
    let mut index: HashMap<String, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut participation: Vec<f64> = vec![0.0; names.len()];

    let add_recipe = |table: &mut HashMap<(usize, usize), usize>,
                      participation: &mut Vec<f64>,
                      a: usize,
                      b: usize,
                      result: usize|
     -> bool {
        let key = (a.min(b), a.max(b));
        if table.contains_key(&key) {
            return false;
        }
        table.insert(key, result);
        participation[a] += 1.0;
        if a != b {
            participation[b] += 1.0;
        }
        true
    };

    for (result, pairs) in CORE {
        if names.len() >= item_count {
            break;
        }
        let r = names.len();
        names.push(result.to_string());
        index.insert(result.to_string(), r);
        participation.push(0.0);
        for (a, b) in *pairs {
            add_recipe(&mut table, &mut participation, index[*a], index[*b], r);
        }
    }

    let mut taken: HashSet<String> = names.iter().cloned().collect();
    let p_stop = 1.0 / MEAN_RECIPES_PER_ITEM;
    while names.len() < item_count {
        let name = loop {
            let w = pseudo_word(&mut rng);
            if taken.insert(w.clone()) {
                break w;
            }
        };
        let r = names.len();
        names.push(name);
        participation.push(0.0);

        let mut wanted = 1;
        while !rng.gen_bool(p_stop) {
            wanted += 1;
        }
        let mut made = 0;
        let mut tries = 0;
        while made < wanted && tries < 50 * wanted {
            tries += 1;
            let a = pick_weighted(&mut rng, &participation[..r]);
            let b = pick_weighted(&mut rng, &participation[..r]);
            if add_recipe(&mut table, &mut participation, a, b, r) {
                made += 1;
            }
        }
        debug_assert!(made > 0, "every stand-in item needs a recipe");
    }

    // re-index in sorted-name order
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.sort_by(|&x, &y| names[x].cmp(&names[y]));
    let mut new_id = vec![ItemId(0); names.len()];
    for (pos, &old) in order.iter().enumerate() {
        new_id[old] = ItemId(pos as u32);
    }
    let sorted_names: Vec<String> = order.iter().map(|&i| names[i].clone()).collect();
    let recipes = table.into_iter().map(|((a, b), r)| Recipe {
        pair: Pair::new(new_id[a], new_id[b]),
        result: new_id[r],
    });
    let base = (0..BASE_ELEMENTS.len()).map(|i| new_id[i]);
    KnowledgeGraph::from_parts(sorted_names, recipes, base).expect("stand-in graph is valid")
}

// linear preferential attachment: weight = participation + 1
fn pick_weighted(rng: &mut ChaCha8Rng, participation: &[f64]) -> usize {
    let total: f64 = participation.iter().map(|p| p + 1.0).sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, p) in participation.iter().enumerate() {
        x -= p + 1.0;
        if x < 0.0 {
            return i;
        }
    }
    participation.len() - 1
}
