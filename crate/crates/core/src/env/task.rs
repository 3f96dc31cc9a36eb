use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvError, EpisodeState};
use crate::kgraph::{min_craft_depth, ItemId, KnowledgeGraph, Pair, MAX_DEPTH_CAP};

/// Bound on whole-task resampling before giving up.
pub const MAX_SAMPLING_RETRIES: u32 = 100;
const DISTRACTOR_TRIES: usize = 200;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task {
    pub task_id: String,
    /// Insertion order is the rendering order.
    pub initial_items: Vec<ItemId>,
    pub target: Option<ItemId>,
    pub horizon: u32,
    pub depth: Option<u32>,
    pub distractors: Option<u32>,
}

impl Task {
    pub fn is_open_ended(&self) -> bool {
        self.target.is_none()
    }

    pub fn initial_set(&self) -> BTreeSet<ItemId> {
        self.initial_items.iter().copied().collect()
    }

    pub fn to_record(&self, g: &KnowledgeGraph) -> TaskRecord {
        TaskRecord {
            task_id: self.task_id.clone(),
            initial_items: self
                .initial_items
                .iter()
                .map(|&i| g.name(i).to_string())
                .collect(),
            target: self.target.map(|t| g.name(t).to_string()),
            horizon: self.horizon,
            depth: self.depth,
            distractors: self.distractors,
        }
    }

    /// Re-expresses the task on another graph through a name mapping.
    pub fn remap(
        &self,
        from: &KnowledgeGraph,
        to: &KnowledgeGraph,
        rename: impl Fn(&str) -> String,
    ) -> Result<Task, EnvError> {
        let mut rec = self.to_record(from);
        rec.initial_items = rec.initial_items.iter().map(|n| rename(n)).collect();
        rec.target = rec.target.as_deref().map(&rename);
        let mut task = rec.resolve(to)?;
        task.task_id = self.task_id.clone();
        Ok(task)
    }
}

/// Name-based task record for portable batch files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub initial_items: Vec<String>,
    pub target: Option<String>,
    pub horizon: u32,
    #[serde(default)]
    pub depth: Option<u32>,
    #[serde(default)]
    pub distractors: Option<u32>,
}

impl TaskRecord {
    pub fn resolve(&self, g: &KnowledgeGraph) -> Result<Task, EnvError> {
        let mut unknown = Vec::new();
        let mut items = Vec::new();
        for n in &self.initial_items {
            match g.id_of(n) {
                Some(id) if !items.contains(&id) => items.push(id),
                Some(_) => {}
                None => unknown.push(n.clone()),
            }
        }
        let target = match &self.target {
            Some(t) => match g.id_of(t) {
                Some(id) => Some(id),
                None => {
                    unknown.push(t.clone());
                    None
                }
            },
            None => None,
        };
        if !unknown.is_empty() {
            return Err(EnvError::UnknownItems(unknown));
        }
        let task = Task {
            task_id: self.task_id.clone(),
            initial_items: items,
            target,
            horizon: self.horizon,
            depth: self.depth,
            distractors: self.distractors,
        };
        validate(&task)?;
        Ok(task)
    }
}

fn validate(task: &Task) -> Result<(), EnvError> {
    if task.horizon == 0 {
        return Err(EnvError::InvalidTask("horizon must be positive".into()));
    }
    if task.initial_items.is_empty() {
        return Err(EnvError::InvalidTask("initial set is empty".into()));
    }
    if let Some(t) = task.target {
        if task.initial_items.contains(&t) {
            return Err(EnvError::InvalidTask("target is in the initial set".into()));
        }
    } else if task.depth.is_some() || task.distractors.is_some() {
        return Err(EnvError::InvalidTask(
            "open-ended tasks carry no depth or distractors".into(),
        ));
    }
    Ok(())
}

pub fn write_task_batch(
    path: impl AsRef<Path>,
    g: &KnowledgeGraph,
    tasks: &[Task],
) -> Result<(), EnvError> {
    let records: Vec<TaskRecord> = tasks.iter().map(|t| t.to_record(g)).collect();
    std::fs::write(path, serde_json::to_string_pretty(&records)?)?;
    Ok(())
}

pub fn read_task_batch(path: impl AsRef<Path>, g: &KnowledgeGraph) -> Result<Vec<Task>, EnvError> {
    let records: Vec<TaskRecord> = serde_json::from_slice(&std::fs::read(path)?)?;
    records.iter().map(|r| r.resolve(g)).collect()
}

fn task_id(g: &KnowledgeGraph, task: &Task) -> String {
    let mut names: Vec<&str> = task.initial_items.iter().map(|&i| g.name(i)).collect();
    names.sort_unstable();
    let key = serde_json::json!({
        "initial": names,
        "target": task.target.map(|t| g.name(t)),
        "horizon": task.horizon,
        "depth": task.depth,
        "distractors": task.distractors,
    });
    let digest = crate::util::sha256_hex(key.to_string().as_bytes());
    let kind = if task.target.is_some() { "t" } else { "o" };
    format!("{kind}-{}", &digest[..12])
}

/// An open-ended task from named initial items.
pub fn make_open_ended_task(
    g: &KnowledgeGraph,
    initial_names: &[&str],
    horizon: u32,
) -> Result<Task, EnvError> {
    let rec = TaskRecord {
        task_id: String::new(),
        initial_items: initial_names.iter().map(|s| s.to_string()).collect(),
        target: None,
        horizon,
        depth: None,
        distractors: None,
    };
    let mut task = rec.resolve(g)?;
    task.task_id = task_id(g, &task);
    Ok(task)
}

/// Success means the target is in the inventory. Open-ended tasks have none.
pub fn is_success(task: &Task, state: &EpisodeState) -> Result<bool, EnvError> {
    let target = task.target.ok_or(EnvError::OpenEnded)?;
    Ok(state.holds(target))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetedSpec {
    pub depth: u32,
    pub distractors: u32,
    pub horizon: u32,
}

/// Backward task sampler with cached producer lists.
pub struct TaskSampler<'g> {
    g: &'g KnowledgeGraph,
    producers: Vec<Vec<Pair>>,
    craftable: Vec<ItemId>,
}

impl<'g> TaskSampler<'g> {
    pub fn new(g: &'g KnowledgeGraph) -> Self {
        let producers = g.producers();
        let craftable = g.craftable_items();
        TaskSampler {
            g,
            producers,
            craftable,
        }
    }

    /// Samples a targeted task whose certified depth equals `spec.depth`.
    ///
    /// The target's recipe tree is expanded backwards `depth - 1` times, its
    /// `depth + 1` distinct leaves form the required initial set, and
    /// distractors that would shorten the path are rejected.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        spec: TargetedSpec,
        rng: &mut R,
    ) -> Result<Task, EnvError> {
        if spec.depth == 0 || spec.depth > MAX_DEPTH_CAP {
            return Err(EnvError::InvalidTask(format!(
                "depth must be in 1..={MAX_DEPTH_CAP}"
            )));
        }
        if spec.horizon == 0 {
            return Err(EnvError::InvalidTask("horizon must be positive".into()));
        }
        if self.craftable.is_empty() {
            return Err(self.failure(spec));
        }
        for _ in 0..MAX_SAMPLING_RETRIES {
            if let Some(task) = self.try_sample(spec, rng)? {
                return Ok(task);
            }
        }
        Err(self.failure(spec))
    }

    fn failure(&self, spec: TargetedSpec) -> EnvError {
        EnvError::GenerationFailed {
            depth: spec.depth,
            distractors: spec.distractors,
            retries: MAX_SAMPLING_RETRIES,
        }
    }

    fn pick_recipe<R: Rng + ?Sized>(
        &self,
        item: ItemId,
        avoid: &[ItemId],
        rng: &mut R,
    ) -> Option<Pair> {
        let options: Vec<Pair> = self.producers[item.index()]
            .iter()
            .copied()
            .filter(|p| !p.is_self_pair() && !avoid.iter().any(|&a| p.contains(a)))
            .collect();
        options.choose(rng).copied()
    }

    fn try_sample<R: Rng + ?Sized>(
        &self,
        spec: TargetedSpec,
        rng: &mut R,
    ) -> Result<Option<Task>, EnvError> {
        let g = self.g;
        let target = *self.craftable.choose(rng).expect("nonempty");
        let Some(root) = self.pick_recipe(target, &[target], rng) else {
            return Ok(None);
        };
        let mut leaves = vec![root.first(), root.second()];
        let mut expanded = vec![target];
        for _ in 1..spec.depth {
            let expandable: Vec<usize> = (0..leaves.len())
                .filter(|&i| !self.producers[leaves[i].index()].is_empty())
                .collect();
            let Some(&slot) = expandable.choose(rng) else {
                return Ok(None);
            };
            let inner = leaves[slot];
            expanded.push(inner);
            let Some(recipe) = self.pick_recipe(inner, &expanded, rng) else {
                return Ok(None);
            };
            leaves.swap_remove(slot);
            leaves.push(recipe.first());
            leaves.push(recipe.second());
        }
        let required: BTreeSet<ItemId> = leaves.iter().copied().collect();
        if required.len() != spec.depth as usize + 1 || required.contains(&target) {
            return Ok(None);
        }
        if min_craft_depth(g, &required, target, spec.depth)? != Some(spec.depth) {
            return Ok(None);
        }

        let mut initial = required.clone();
        let mut added = 0;
        let mut tries = 0;
        while added < spec.distractors {
            if tries >= DISTRACTOR_TRIES {
                return Ok(None);
            }
            tries += 1;
            let candidate = ItemId(rng.gen_range(0..g.item_count() as u32));
            if candidate == target || initial.contains(&candidate) {
                continue;
            }
            initial.insert(candidate);
            if min_craft_depth(g, &initial, target, spec.depth)? == Some(spec.depth) {
                added += 1;
            } else {
                initial.remove(&candidate);
            }
        }

        let mut items: Vec<ItemId> = initial.into_iter().collect();
        items.shuffle(rng);
        let mut task = Task {
            task_id: String::new(),
            initial_items: items,
            target: Some(target),
            horizon: spec.horizon,
            depth: Some(spec.depth),
            distractors: Some(spec.distractors),
        };
        task.task_id = task_id(g, &task);
        Ok(Some(task))
    }
}

/// Convenience wrapper building a one-off [`TaskSampler`].
pub fn sample_targeted_task<R: Rng + ?Sized>(
    g: &KnowledgeGraph,
    spec: TargetedSpec,
    rng: &mut R,
) -> Result<Task, EnvError> {
    TaskSampler::new(g).sample(spec, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgraph::{standin, test_graph};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const D1W3: TargetedSpec = TargetedSpec {
        depth: 1,
        distractors: 3,
        horizon: 6,
    };

    #[test]
    fn depth_one_with_three_distractors_has_five_items() {
        let g = standin::la2_standin();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let t = sample_targeted_task(&g, D1W3, &mut rng).unwrap();
            assert_eq!(t.initial_items.len(), 5);
            assert!(!t.initial_items.contains(&t.target.unwrap()));
        }
    }

    #[test]
    fn forced_single_recipe() {
        let g = test_graph(&["a", "b", "t"], &[("a", "b", "t")]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let spec = TargetedSpec {
            depth: 1,
            distractors: 0,
            horizon: 6,
        };
        let t = sample_targeted_task(&g, spec, &mut rng).unwrap();
        assert_eq!(t.target, g.id_of("t"));
        assert_eq!(
            t.initial_set(),
            [g.id_of("a").unwrap(), g.id_of("b").unwrap()].into()
        );
    }

    #[test]
    fn impossible_request_fails_explicitly() {
        let g = test_graph(&["a", "b", "t"], &[("a", "b", "t")]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let spec = TargetedSpec {
            depth: 2,
            distractors: 0,
            horizon: 6,
        };
        assert!(matches!(
            sample_targeted_task(&g, spec, &mut rng),
            Err(EnvError::GenerationFailed { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = standin::generate(4, 200);
        let a = sample_targeted_task(&g, D1W3, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = sample_targeted_task(&g, D1W3, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn open_ended_tasks() {
        let g = standin::la2_standin();
        let t = make_open_ended_task(&g, &["air", "earth", "fire", "water"], 200).unwrap();
        assert!(t.is_open_ended());
        assert_eq!(t.horizon, 200);
        let again = make_open_ended_task(&g, &["air", "earth", "fire", "water"], 200).unwrap();
        assert_eq!(t.task_id, again.task_id);

        let single = make_open_ended_task(&g, &["fire"], 1).unwrap();
        assert_eq!(single.initial_items.len(), 1);

        match make_open_ended_task(&g, &["fire", "unobtainium", "nope"], 5) {
            Err(EnvError::UnknownItems(names)) => assert_eq!(names, ["unobtainium", "nope"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn success_contract() {
        let g = test_graph(&["a", "b", "t"], &[("a", "b", "t")]);
        let open = make_open_ended_task(&g, &["a"], 2).unwrap();
        let s = EpisodeState::new(&g, &open);
        assert!(matches!(is_success(&open, &s), Err(EnvError::OpenEnded)));

        let spec = TargetedSpec {
            depth: 1,
            distractors: 0,
            horizon: 6,
        };
        let t = sample_targeted_task(&g, spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut s = EpisodeState::new(&g, &t);
        assert!(!is_success(&t, &s).unwrap());
        s.apply(&g, Pair::new(g.id_of("a").unwrap(), g.id_of("b").unwrap()))
            .unwrap();
        assert!(is_success(&t, &s).unwrap());
    }

    #[test]
    fn batch_file_round_trip() {
        let g = standin::generate(4, 200);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tasks: Vec<Task> = (0..5)
            .map(|_| sample_targeted_task(&g, D1W3, &mut rng).unwrap())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tasks.json");
        write_task_batch(&path, &g, &tasks).unwrap();
        assert_eq!(read_task_batch(&path, &g).unwrap(), tasks);
    }
}
