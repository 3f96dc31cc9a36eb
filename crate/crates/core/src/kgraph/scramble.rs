use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::KnowledgeGraph;

pub const SCRAMBLED_NAME_LEN: usize = 5;

/// Original name -> scrambled name.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScrambleMap(pub BTreeMap<String, String>);

impl ScrambleMap {
    pub fn get(&self, original: &str) -> Option<&str> {
        self.0.get(original).map(String::as_str)
    }
}

/// Renames every item to a random 5-letter lowercase string.
///
/// Ids, recipes and base items are untouched, so the result is isomorphic
/// under the identity id map and id-based policies behave identically.
pub fn scramble_semantics(g: &KnowledgeGraph, seed: u64) -> (KnowledgeGraph, ScrambleMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = HashSet::with_capacity(g.item_count());
    let mut new_names = Vec::with_capacity(g.item_count());
    let mut map = BTreeMap::new();
    for item in g.items() {
        let name = loop {
            let candidate: String = (0..SCRAMBLED_NAME_LEN)
                .map(|_| rng.gen_range(b'a'..=b'z') as char)
                .collect();
            if taken.insert(candidate.clone()) {
                break candidate;
            }
        };
        map.insert(item.name.clone(), name.clone());
        new_names.push(name);
    }
    let mut out =
        KnowledgeGraph::from_parts(new_names, g.recipes(), g.base_items().iter().copied())
            .expect("renaming preserves validity");
    for w in g.warnings() {
        out.push_warning(w.clone());
    }
    (out, ScrambleMap(map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgraph::{standin, ItemId};

    #[test]
    fn scramble_is_isomorphic_and_well_formed() {
        let g = standin::generate(3, 120);
        let (s, map) = scramble_semantics(&g, 11);
        let identity: Vec<ItemId> = (0..g.item_count() as u32).map(ItemId).collect();
        assert!(g.is_isomorphic_under(&s, &identity));
        assert_eq!(map.0.len(), g.item_count());
        for item in s.items() {
            assert_eq!(item.name.len(), SCRAMBLED_NAME_LEN);
            assert!(item.name.bytes().all(|b| b.is_ascii_lowercase()));
        }
    }

    #[test]
    fn same_seed_same_map() {
        let g = standin::generate(3, 80);
        assert_eq!(scramble_semantics(&g, 5).1, scramble_semantics(&g, 5).1);
        assert_ne!(scramble_semantics(&g, 5).1, scramble_semantics(&g, 6).1);
    }

    #[test]
    fn reloaded_scramble_is_isomorphic_through_names() {
        let g = standin::generate(1, 100);
        let (s, map) = scramble_semantics(&g, 2);
        let reloaded = KnowledgeGraph::from_file(&s.to_file()).unwrap();
        let id_map: Vec<ItemId> = g
            .items()
            .iter()
            .map(|i| reloaded.id_of(map.get(&i.name).unwrap()).unwrap())
            .collect();
        assert!(g.is_isomorphic_under(&reloaded, &id_map));
    }
}
