//! Crafting knowledge graph: items, recipes, empowerment and depth queries.
//!
//! A graph is immutable once built. Item ids are dense `u32` indices assigned
//! in sorted-name order by [`KnowledgeGraph::from_file`]; every query is a
//! pure function of the graph and its arguments.

mod depth;
mod schema;
mod scramble;
pub mod standin;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use depth::{min_craft_depth, reachable_closure, MAX_DEPTH_CAP};
pub use schema::{convert_wordcraft, RecipeEntry, RecipeFile};
pub use scramble::{scramble_semantics, ScrambleMap, SCRAMBLED_NAME_LEN};

/// Dense item index into a [`KnowledgeGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItemId(pub u32);

impl ItemId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Unordered item pair, stored with the smaller id first. Self-pairs are legal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pair {
    first: ItemId,
    second: ItemId,
}

impl Pair {
    pub fn new(a: ItemId, b: ItemId) -> Self {
        if a <= b {
            Pair {
                first: a,
                second: b,
            }
        } else {
            Pair {
                first: b,
                second: a,
            }
        }
    }

    pub fn first(self) -> ItemId {
        self.first
    }

    pub fn second(self) -> ItemId {
        self.second
    }

    pub fn contains(self, item: ItemId) -> bool {
        self.first == item || self.second == item
    }

    pub fn is_self_pair(self) -> bool {
        self.first == self.second
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Item {
    pub id: ItemId,
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Recipe {
    pub pair: Pair,
    pub result: ItemId,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed recipe file at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("empty item name in {context}")]
    EmptyName { context: String },
    #[error("duplicate item name '{0}'")]
    DuplicateItem(String),
    #[error("unknown item '{name}' referenced in {context}")]
    UnknownItem { name: String, context: String },
    #[error("conflicting recipes for ('{first}', '{second}'): '{result_a}' vs '{result_b}'")]
    ConflictingRecipe {
        first: String,
        second: String,
        result_a: String,
        result_b: String,
    },
    #[error("item id {id} out of range (graph has {count} items)")]
    InvalidId { id: u32, count: usize },
    #[error("seed set must not be empty")]
    EmptySeed,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Lowercase, trim, and collapse internal whitespace to single spaces.
pub fn normalize_name(raw: &str) -> String {
    raw.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// The recipe oracle shared by every episode.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    items: Vec<Item>,
    by_name: HashMap<String, ItemId>,
    recipes: HashMap<Pair, ItemId>,
    base_items: BTreeSet<ItemId>,
    // item -> (partner, result), sorted by partner id
    partners: Vec<Vec<(ItemId, ItemId)>>,
    empowerment: Vec<u32>,
    warnings: Vec<String>,
}

impl KnowledgeGraph {
    /// Builds a graph from already-resolved parts. Ids are the slice positions.
    ///
    /// Later entries for the same pair are errors; callers that want to
    /// collapse multi-result data do so before calling.
    pub fn from_parts(
        names: Vec<String>,
        recipes: impl IntoIterator<Item = Recipe>,
        base_items: impl IntoIterator<Item = ItemId>,
    ) -> Result<Self, GraphError> {
        let mut by_name = HashMap::with_capacity(names.len());
        let mut items = Vec::with_capacity(names.len());
        for (i, raw) in names.into_iter().enumerate() {
            let name = normalize_name(&raw);
            if name.is_empty() {
                return Err(GraphError::EmptyName {
                    context: format!("item #{i}"),
                });
            }
            let id = ItemId(i as u32);
            if by_name.insert(name.clone(), id).is_some() {
                return Err(GraphError::DuplicateItem(name));
            }
            items.push(Item { id, name });
        }
        let count = items.len();
        let check = |id: ItemId| -> Result<ItemId, GraphError> {
            if id.index() < count {
                Ok(id)
            } else {
                Err(GraphError::InvalidId { id: id.0, count })
            }
        };

        let mut table: HashMap<Pair, ItemId> = HashMap::new();
        for r in recipes {
            check(r.pair.first())?;
            check(r.pair.second())?;
            check(r.result)?;
            if let Some(prev) = table.insert(r.pair, r.result) {
                if prev != r.result {
                    return Err(GraphError::ConflictingRecipe {
                        first: items[r.pair.first().index()].name.clone(),
                        second: items[r.pair.second().index()].name.clone(),
                        result_a: items[prev.index()].name.clone(),
                        result_b: items[r.result.index()].name.clone(),
                    });
                }
            }
        }

        let base: BTreeSet<ItemId> = base_items
            .into_iter()
            .map(check)
            .collect::<Result<_, _>>()?;

        let mut partners = vec![Vec::new(); count];
        let mut empowerment = vec![0u32; count];
        for (&pair, &result) in &table {
            partners[pair.first().index()].push((pair.second(), result));
            empowerment[pair.first().index()] += 1;
            if !pair.is_self_pair() {
                partners[pair.second().index()].push((pair.first(), result));
                empowerment[pair.second().index()] += 1;
            }
        }
        for list in &mut partners {
            list.sort_unstable();
        }

        let mut warnings = Vec::new();
        let mut produced: BTreeSet<ItemId> = BTreeSet::new();
        produced.extend(table.values().copied());
        for b in &base {
            if produced.contains(b) {
                warnings.push(format!(
                    "base item '{}' is produced by a recipe",
                    items[b.index()].name
                ));
            }
        }

        Ok(KnowledgeGraph {
            items,
            by_name,
            recipes: table,
            base_items: base,
            partners,
            empowerment,
            warnings,
        })
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn recipe_count(&self) -> usize {
        self.recipes.len()
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn base_items(&self) -> &BTreeSet<ItemId> {
        &self.base_items
    }

    /// Load-time warnings (multi-result collapses, craftable base items).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub(crate) fn push_warning(&mut self, w: String) {
        self.warnings.push(w);
    }

    pub fn check_id(&self, id: ItemId) -> Result<ItemId, GraphError> {
        if id.index() < self.items.len() {
            Ok(id)
        } else {
            Err(GraphError::InvalidId {
                id: id.0,
                count: self.items.len(),
            })
        }
    }

    pub fn name(&self, id: ItemId) -> &str {
        &self.items[id.index()].name
    }

    /// Resolves a name after normalization.
    pub fn id_of(&self, name: &str) -> Option<ItemId> {
        self.by_name.get(&normalize_name(name)).copied()
    }

    pub fn resolve(&self, name: &str, context: &str) -> Result<ItemId, GraphError> {
        self.id_of(name).ok_or_else(|| GraphError::UnknownItem {
            name: name.to_string(),
            context: context.to_string(),
        })
    }

    /// Result of combining `a` and `b`, if any. Symmetric in its arguments.
    pub fn combine(&self, a: ItemId, b: ItemId) -> Result<Option<ItemId>, GraphError> {
        self.check_id(a)?;
        self.check_id(b)?;
        Ok(self.combine_pair(Pair::new(a, b)))
    }

    /// Unchecked lookup for pairs already known to be in range.
    pub fn combine_pair(&self, pair: Pair) -> Option<ItemId> {
        self.recipes.get(&pair).copied()
    }

    /// Number of recipe pairs the item participates in; a self-pair counts once.
    pub fn empowerment(&self, item: ItemId) -> Result<u32, GraphError> {
        self.check_id(item)?;
        Ok(self.empowerment[item.index()])
    }

    pub(crate) fn empowerment_unchecked(&self, item: ItemId) -> u32 {
        self.empowerment[item.index()]
    }

    /// `(partner, result)` for every recipe containing `item`, sorted by partner.
    pub fn partners(&self, item: ItemId) -> &[(ItemId, ItemId)] {
        &self.partners[item.index()]
    }

    /// All recipes in canonical pair order.
    pub fn recipes(&self) -> Vec<Recipe> {
        let mut out: Vec<Recipe> = self
            .recipes
            .iter()
            .map(|(&pair, &result)| Recipe { pair, result })
            .collect();
        out.sort_by_key(|r| r.pair);
        out
    }

    /// Items produced by at least one recipe, ascending.
    pub fn craftable_items(&self) -> Vec<ItemId> {
        let set: BTreeSet<ItemId> = self.recipes.values().copied().collect();
        set.into_iter().collect()
    }

    /// Recipes producing `target`, in canonical pair order.
    pub fn recipes_for(&self, target: ItemId) -> Vec<Pair> {
        let mut out: Vec<Pair> = self
            .recipes
            .iter()
            .filter(|(_, &r)| r == target)
            .map(|(&p, _)| p)
            .collect();
        out.sort();
        out
    }

    /// Index of producing recipes for every item, built on demand.
    pub fn producers(&self) -> Vec<Vec<Pair>> {
        let mut out = vec![Vec::new(); self.items.len()];
        for (&pair, &result) in &self.recipes {
            out[result.index()].push(pair);
        }
        for list in &mut out {
            list.sort();
        }
        out
    }

    /// Serializes to the canonical recipe-file schema.
    pub fn to_file(&self) -> RecipeFile {
        let recipes = self
            .recipes()
            .into_iter()
            .map(|r| RecipeEntry {
                first: self.name(r.pair.first()).to_string(),
                second: self.name(r.pair.second()).to_string(),
                result: self.name(r.result).to_string(),
            })
            .collect();
        RecipeFile {
            items: self.items.iter().map(|i| i.name.clone()).collect(),
            base_items: self
                .base_items
                .iter()
                .map(|&b| self.name(b).to_string())
                .collect(),
            recipes,
        }
    }

    /// Structural isomorphism check under an explicit id mapping `map[old] = new`.
    pub fn is_isomorphic_under(&self, other: &KnowledgeGraph, map: &[ItemId]) -> bool {
        if self.item_count() != other.item_count()
            || self.recipe_count() != other.recipe_count()
            || map.len() != self.item_count()
        {
            return false;
        }
        let image: BTreeSet<ItemId> = map.iter().copied().collect();
        if image.len() != map.len() {
            return false;
        }
        self.recipes.iter().all(|(pair, result)| {
            let p = Pair::new(map[pair.first().index()], map[pair.second().index()]);
            other.combine_pair(p) == Some(map[result.index()])
        })
    }

    /// Canonical content hash (sha256 of the canonical JSON encoding).
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(&self.to_file()).expect("recipe file serializes");
        crate::util::sha256_hex(&json)
    }
}

/// Names sorted for deterministic id assignment.
pub(crate) fn sorted_unique_names(
    names: impl IntoIterator<Item = String>,
) -> Result<Vec<String>, GraphError> {
    let mut seen = BTreeMap::new();
    for raw in names {
        let n = normalize_name(&raw);
        if n.is_empty() {
            return Err(GraphError::EmptyName {
                context: "items".into(),
            });
        }
        if seen.insert(n.clone(), ()).is_some() {
            return Err(GraphError::DuplicateItem(n));
        }
    }
    Ok(seen.into_keys().collect())
}

#[cfg(test)]
pub(crate) use tests::graph as test_graph;

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn graph(names: &[&str], recipes: &[(&str, &str, &str)]) -> KnowledgeGraph {
        let file = RecipeFile {
            items: names.iter().map(|s| s.to_string()).collect(),
            base_items: vec![],
            recipes: recipes
                .iter()
                .map(|(a, b, r)| RecipeEntry {
                    first: a.to_string(),
                    second: b.to_string(),
                    result: r.to_string(),
                })
                .collect(),
        };
        KnowledgeGraph::from_file(&file).unwrap()
    }

    #[test]
    fn fire_and_water_make_steam() {
        let g = graph(&["fire", "water", "steam"], &[("fire", "water", "steam")]);
        let fire = g.id_of("fire").unwrap();
        let water = g.id_of("water").unwrap();
        assert_eq!(g.combine(fire, water).unwrap(), g.id_of("steam"));
        assert_eq!(g.combine(water, fire).unwrap(), g.id_of("steam"));
        assert_eq!(g.combine(fire, fire).unwrap(), None);
    }

    #[test]
    fn empty_recipe_list() {
        let g = graph(&["air", "earth", "fire", "water"], &[]);
        assert_eq!(g.recipe_count(), 0);
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(g.combine(ItemId(a), ItemId(b)).unwrap(), None);
            }
        }
    }

    #[test]
    fn invalid_ids_are_rejected() {
        let g = graph(&["a", "b"], &[("a", "b", "a")]);
        assert!(matches!(
            g.combine(ItemId(0), ItemId(7)),
            Err(GraphError::InvalidId { id: 7, count: 2 })
        ));
        assert!(g.empowerment(ItemId(2)).is_err());
    }

    #[test]
    fn empowerment_counts_self_pair_once() {
        let g = graph(&["x", "a", "p", "q"], &[("x", "a", "p"), ("x", "x", "q")]);
        let x = g.id_of("x").unwrap();
        assert_eq!(g.empowerment(x).unwrap(), 2);
        assert_eq!(g.empowerment(g.id_of("a").unwrap()).unwrap(), 1);
        assert_eq!(g.empowerment(g.id_of("q").unwrap()).unwrap(), 0);
    }

    #[test]
    fn names_are_normalized_and_ids_sorted() {
        let g = graph(
            &["  Water ", "FIRE", "hot   steam"],
            &[("fire", "WATER", "Hot Steam")],
        );
        let names: Vec<_> = g.items().iter().map(|i| i.name.as_str()).collect();
        assert_eq!(names, ["fire", "hot steam", "water"]);
        assert_eq!(g.id_of("HOT steam"), Some(ItemId(1)));
    }

    #[test]
    fn craftable_base_item_is_a_warning() {
        let file = RecipeFile {
            items: vec!["a".into(), "b".into()],
            base_items: vec!["b".into()],
            recipes: vec![RecipeEntry {
                first: "a".into(),
                second: "a".into(),
                result: "b".into(),
            }],
        };
        let g = KnowledgeGraph::from_file(&file).unwrap();
        assert_eq!(g.warnings().len(), 1);
    }
}
