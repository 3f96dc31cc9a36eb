use std::collections::HashSet;

use super::{EnvError, Task};
use crate::kgraph::{ItemId, KnowledgeGraph, Pair};

/// A crafting action: an unordered pair of inventory items.
pub type Action = Pair;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutcomeKind {
    NewItem(ItemId),
    DuplicateResult(ItemId),
    InvalidCombo,
    RepeatedAttempt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    pub kind: OutcomeKind,
    pub step_index: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Initial,
    Crafted,
    /// Received by diffusion; `from` is the attributed first crafter.
    Copied {
        from: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Acquisition {
    pub item: ItemId,
    pub step: u32,
    pub source: Source,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ValidAttempt {
    pub pair: Pair,
    pub result: ItemId,
    pub step: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InvalidAttempt {
    pub pair: Pair,
    pub step: u32,
}

const ABSENT: u32 = u32::MAX;

/// One agent's view of one episode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpisodeState {
    inventory: Vec<Acquisition>,
    // item id -> inventory position
    slot: Vec<u32>,
    valid_attempts: Vec<ValidAttempt>,
    invalid_attempts: Vec<InvalidAttempt>,
    attempted: HashSet<Pair>,
    step: u32,
    horizon: u32,
    repetition_count: u32,
}

impl EpisodeState {
    pub fn new(g: &KnowledgeGraph, task: &Task) -> Self {
        let mut s = EpisodeState {
            inventory: Vec::with_capacity(task.initial_items.len() + task.horizon as usize),
            slot: vec![ABSENT; g.item_count()],
            valid_attempts: Vec::new(),
            invalid_attempts: Vec::new(),
            attempted: HashSet::new(),
            step: 0,
            horizon: task.horizon,
            repetition_count: 0,
        };
        for &item in &task.initial_items {
            s.insert(item, 0, Source::Initial);
        }
        s
    }

    fn insert(&mut self, item: ItemId, step: u32, source: Source) -> bool {
        if self.slot[item.index()] != ABSENT {
            return false;
        }
        self.slot[item.index()] = self.inventory.len() as u32;
        self.inventory.push(Acquisition { item, step, source });
        true
    }

    pub fn inventory(&self) -> impl ExactSizeIterator<Item = ItemId> + '_ {
        self.inventory.iter().map(|a| a.item)
    }

    pub fn acquisitions(&self) -> &[Acquisition] {
        &self.inventory
    }

    pub fn inventory_len(&self) -> usize {
        self.inventory.len()
    }

    pub fn item_at(&self, position: usize) -> ItemId {
        self.inventory[position].item
    }

    pub fn position(&self, item: ItemId) -> Option<usize> {
        match self.slot.get(item.index()) {
            Some(&p) if p != ABSENT => Some(p as usize),
            _ => None,
        }
    }

    pub fn holds(&self, item: ItemId) -> bool {
        self.position(item).is_some()
    }

    pub fn valid_attempts(&self) -> &[ValidAttempt] {
        &self.valid_attempts
    }

    pub fn invalid_attempts(&self) -> &[InvalidAttempt] {
        &self.invalid_attempts
    }

    pub fn has_attempted(&self, pair: Pair) -> bool {
        self.attempted.contains(&pair)
    }

    pub fn attempt_count(&self) -> usize {
        self.attempted.len()
    }

    pub fn step(&self) -> u32 {
        self.step
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn remaining(&self) -> u32 {
        self.horizon - self.step
    }

    pub fn is_over(&self) -> bool {
        self.step >= self.horizon
    }

    pub fn repetition_count(&self) -> u32 {
        self.repetition_count
    }

    /// Applies an action in place. Repeated pairs leave the state untouched
    /// apart from the repetition counter and do not consume a step.
    pub fn apply(&mut self, g: &KnowledgeGraph, action: Action) -> Result<StepOutcome, EnvError> {
        if self.is_over() {
            return Err(EnvError::EpisodeOver {
                step: self.step,
                horizon: self.horizon,
            });
        }
        for item in [action.first(), action.second()] {
            g.check_id(item)?;
            if !self.holds(item) {
                return Err(EnvError::NotInInventory(item));
            }
        }
        let step_index = self.step;
        if self.attempted.contains(&action) {
            self.repetition_count += 1;
            return Ok(StepOutcome {
                kind: OutcomeKind::RepeatedAttempt,
                step_index,
            });
        }
        self.attempted.insert(action);
        self.step += 1;
        let kind = match g.combine_pair(action) {
            Some(result) => {
                self.valid_attempts.push(ValidAttempt {
                    pair: action,
                    result,
                    step: step_index,
                });
                if self.insert(result, step_index, Source::Crafted) {
                    OutcomeKind::NewItem(result)
                } else {
                    OutcomeKind::DuplicateResult(result)
                }
            }
            None => {
                self.invalid_attempts.push(InvalidAttempt {
                    pair: action,
                    step: step_index,
                });
                OutcomeKind::InvalidCombo
            }
        };
        Ok(StepOutcome { kind, step_index })
    }

    /// Spends a step on an executed repeat (the agent loop's budget rule).
    pub fn consume_repeated_step(&mut self) -> Result<(), EnvError> {
        if self.is_over() {
            return Err(EnvError::EpisodeOver {
                step: self.step,
                horizon: self.horizon,
            });
        }
        self.step += 1;
        Ok(())
    }

    /// Adds an item received from a neighbor. Returns whether it was new.
    pub fn receive(&mut self, item: ItemId, step: u32, from: usize) -> bool {
        self.insert(item, step, Source::Copied { from })
    }
}

/// Pure transition: returns the successor state and the outcome.
pub fn step(
    g: &KnowledgeGraph,
    s: &EpisodeState,
    a: Action,
) -> Result<(EpisodeState, StepOutcome), EnvError> {
    let mut next = s.clone();
    let outcome = next.apply(g, a)?;
    Ok((next, outcome))
}
