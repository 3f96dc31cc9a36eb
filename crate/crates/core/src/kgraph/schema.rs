use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    normalize_name, sorted_unique_names, GraphError, ItemId, KnowledgeGraph, Pair, Recipe,
};

/// Canonical on-disk recipe file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeFile {
    pub items: Vec<String>,
    #[serde(default)]
    pub base_items: Vec<String>,
    pub recipes: Vec<RecipeEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeEntry {
    pub first: String,
    pub second: String,
    pub result: String,
}

impl RecipeFile {
    pub fn from_json(bytes: &[u8]) -> Result<Self, GraphError> {
        serde_json::from_slice(bytes).map_err(|e| GraphError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("recipe file serializes")
    }
}

impl KnowledgeGraph {
    /// Parses recipe-file bytes and builds the graph.
    pub fn load(source: &[u8]) -> Result<Self, GraphError> {
        Self::from_file(&RecipeFile::from_json(source)?)
    }

    pub fn load_path(path: impl AsRef<std::path::Path>) -> Result<Self, GraphError> {
        Self::load(&std::fs::read(path)?)
    }

    /// Ids are assigned in sorted normalized-name order. A pair listed twice
    /// with different results is an error naming the pair.
    pub fn from_file(file: &RecipeFile) -> Result<Self, GraphError> {
        let names = sorted_unique_names(file.items.iter().cloned())?;
        let index: BTreeMap<&str, ItemId> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), ItemId(i as u32)))
            .collect();
        let lookup = |raw: &str, context: &str| -> Result<ItemId, GraphError> {
            let n = normalize_name(raw);
            index
                .get(n.as_str())
                .copied()
                .ok_or_else(|| GraphError::UnknownItem {
                    name: n,
                    context: context.to_string(),
                })
        };
        let mut recipes = Vec::with_capacity(file.recipes.len());
        for (i, r) in file.recipes.iter().enumerate() {
            let ctx = format!("recipe #{i}");
            recipes.push(Recipe {
                pair: Pair::new(lookup(&r.first, &ctx)?, lookup(&r.second, &ctx)?),
                result: lookup(&r.result, &ctx)?,
            });
        }
        let base = file
            .base_items
            .iter()
            .map(|b| lookup(b, "base_items"))
            .collect::<Result<Vec<_>, _>>()?;
        KnowledgeGraph::from_parts(names, recipes, base)
    }
}

#[derive(Deserialize)]
struct WordcraftDump {
    entities: BTreeMap<String, WordcraftEntity>,
}

#[derive(Deserialize)]
struct WordcraftEntity {
    #[serde(default)]
    recipes: Vec<Vec<String>>,
}

/// Converts a Wordcraft-style dump (`{"entities": {name: {"recipes": [[a, b], ..]}}}`)
/// to the canonical schema.
///
/// Pairs that yield several results keep the lexicographically smallest
/// result; each collapse is reported in the returned warnings. Entities
/// without recipes become base items.
pub fn convert_wordcraft(source: &[u8]) -> Result<(RecipeFile, Vec<String>), GraphError> {
    let dump: WordcraftDump = serde_json::from_slice(source).map_err(|e| GraphError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut items: BTreeSet<String> = BTreeSet::new();
    let mut base = Vec::new();
    // canonical (name, name) -> every result seen
    let mut table: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
    for (raw_result, entity) in &dump.entities {
        let result = normalize_name(raw_result);
        if result.is_empty() {
            return Err(GraphError::EmptyName {
                context: "entities".into(),
            });
        }
        items.insert(result.clone());
        if entity.recipes.is_empty() {
            base.push(result.clone());
        }
        for ingredients in &entity.recipes {
            let [a, b] = ingredients.as_slice() else {
                return Err(GraphError::Parse {
                    line: 0,
                    column: 0,
                    message: format!(
                        "recipe for '{result}' has {} ingredients, expected 2",
                        ingredients.len()
                    ),
                });
            };
            let (a, b) = (normalize_name(a), normalize_name(b));
            items.insert(a.clone());
            items.insert(b.clone());
            let key = if a <= b { (a, b) } else { (b, a) };
            table.entry(key).or_default().insert(result.clone());
        }
    }

    let mut warnings = Vec::new();
    let recipes = table
        .into_iter()
        .map(|((first, second), results)| {
            let kept = results.iter().next().expect("nonempty").clone();
            if results.len() > 1 {
                warnings.push(format!(
                    "('{first}', '{second}') yields {} results {:?}; kept '{kept}'",
                    results.len(),
                    results
                ));
            }
            RecipeEntry {
                first,
                second,
                result: kept,
            }
        })
        .collect();
    Ok((
        RecipeFile {
            items: items.into_iter().collect(),
            base_items: base,
            recipes,
        },
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn malformed_json_reports_position() {
        let err = KnowledgeGraph::load(b"{\"items\": [\"a\",\n  }").unwrap_err();
        match err {
            GraphError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn conflicting_recipes_name_the_pair() {
        let src = br#"{"items":["a","b","c","d"],"base_items":[],"recipes":[
            {"first":"a","second":"b","result":"c"},
            {"first":"b","second":"a","result":"d"}]}"#;
        let err = KnowledgeGraph::load(src).unwrap_err().to_string();
        assert!(err.contains("'a'") && err.contains("'b'"), "{err}");
    }

    #[test]
    fn repeated_identical_recipe_is_accepted() {
        let src = br#"{"items":["a","b","c"],"recipes":[
            {"first":"a","second":"b","result":"c"},
            {"first":"b","second":"a","result":"c"}]}"#;
        assert_eq!(KnowledgeGraph::load(src).unwrap().recipe_count(), 1);
    }

    #[test]
    fn unknown_name_is_an_error() {
        let src = br#"{"items":["a"],"recipes":[{"first":"a","second":"a","result":"zz"}]}"#;
        assert!(matches!(
            KnowledgeGraph::load(src),
            Err(GraphError::UnknownItem { .. })
        ));
    }

    #[test]
    fn wordcraft_multi_result_keeps_smallest() {
        let src = br#"{"entities":{
            "fire":{"recipes":[]},"water":{"recipes":[]},
            "steam":{"recipes":[["Fire","water"]]},
            "mist":{"recipes":[["water","fire"]]}}}"#;
        let (file, warnings) = convert_wordcraft(src).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(file.recipes.len(), 1);
        assert_eq!(file.recipes[0].result, "mist");
        assert_eq!(file.base_items, vec!["fire", "water"]);
        let g = KnowledgeGraph::from_file(&file).unwrap();
        assert_eq!(g.item_count(), 4);
    }

    #[test]
    fn file_round_trip_preserves_graph() {
        let g = crate::kgraph::standin::generate(7, 60);
        let again = KnowledgeGraph::from_file(&g.to_file()).unwrap();
        let identity: Vec<ItemId> = (0..g.item_count() as u32).map(ItemId).collect();
        assert!(g.is_isomorphic_under(&again, &identity));
        assert_eq!(g.content_hash(), again.content_hash());
    }
}
