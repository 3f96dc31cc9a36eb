use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Topology block of a run config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    FullyConnected,
    /// Subgroups with temporary visits. A visit is drawn with probability
    /// `visit_prob` per eligible subgroup at every `visit_len` boundary.
    Dynamic {
        #[serde(default = "default_subgroup_size")]
        subgroup_size: usize,
        visit_prob: f64,
        visit_len: u32,
    },
    /// Fixed undirected adjacency lists.
    Custom {
        adjacency: Vec<Vec<usize>>,
    },
}

fn default_subgroup_size() -> usize {
    2
}

impl TopologySpec {
    pub fn dynamic(visit_prob: f64, visit_len: u32) -> Self {
        TopologySpec::Dynamic {
            subgroup_size: 2,
            visit_prob,
            visit_len,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TopologySpec::FullyConnected => "fully_connected",
            TopologySpec::Dynamic { .. } => "dynamic",
            TopologySpec::Custom { .. } => "custom",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("group needs at least one agent")]
    Empty,
    #[error("subgroup size must be positive")]
    ZeroSubgroup,
    #[error("visit probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("visit length must be positive")]
    ZeroVisitLength,
    #[error("adjacency has {found} rows for {expected} agents")]
    AdjacencySize { expected: usize, found: usize },
    #[error("adjacency is not symmetric: {0} -> {1} has no reverse edge")]
    Asymmetric(usize, usize),
    #[error("adjacency entry {0} out of range")]
    OutOfRange(usize),
    #[error("agent {0} is not visiting")]
    NotVisiting(usize),
    #[error("agent {agent} cannot visit subgroup {host}")]
    BadVisit { agent: usize, host: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Visit {
    pub visitor: usize,
    pub home: usize,
    pub host: usize,
    pub steps_remaining: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum VisitEvent {
    Start {
        visitor: usize,
        home: usize,
        host: usize,
    },
    End {
        visitor: usize,
        home: usize,
        host: usize,
    },
}

/// Who can see whom. Neighborhood is symmetric for every kind.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupTopology {
    agent_count: usize,
    spec: TopologySpec,
    home: Vec<usize>,
    location: Vec<usize>,
    visits: Vec<Visit>,
    adjacency: Vec<BTreeSet<usize>>,
}

impl GroupTopology {
    pub fn new(agent_count: usize, spec: TopologySpec) -> Result<Self, TopologyError> {
        if agent_count == 0 {
            return Err(TopologyError::Empty);
        }
        let mut home = vec![0; agent_count];
        let mut adjacency = Vec::new();
        match &spec {
            TopologySpec::FullyConnected => {}
            TopologySpec::Dynamic {
                subgroup_size,
                visit_prob,
                visit_len,
            } => {
                if *subgroup_size == 0 {
                    return Err(TopologyError::ZeroSubgroup);
                }
                if !(0.0..=1.0).contains(visit_prob) {
                    return Err(TopologyError::BadProbability(*visit_prob));
                }
                if *visit_len == 0 {
                    return Err(TopologyError::ZeroVisitLength);
                }
                for (a, h) in home.iter_mut().enumerate() {
                    *h = a / subgroup_size;
                }
            }
            TopologySpec::Custom { adjacency: rows } => {
                if rows.len() != agent_count {
                    return Err(TopologyError::AdjacencySize {
                        expected: agent_count,
                        found: rows.len(),
                    });
                }
                adjacency = rows
                    .iter()
                    .enumerate()
                    .map(|(a, row)| row.iter().copied().filter(|&b| b != a).collect())
                    .collect::<Vec<BTreeSet<usize>>>();
                for (a, row) in adjacency.iter().enumerate() {
                    for &b in row {
                        if b >= agent_count {
                            return Err(TopologyError::OutOfRange(b));
                        }
                        if !adjacency[b].contains(&a) {
                            return Err(TopologyError::Asymmetric(a, b));
                        }
                    }
                }
            }
        }
        Ok(GroupTopology {
            agent_count,
            location: home.clone(),
            home,
            spec,
            visits: Vec::new(),
            adjacency,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.agent_count
    }

    pub fn spec(&self) -> &TopologySpec {
        &self.spec
    }

    pub fn subgroup_count(&self) -> usize {
        match self.spec {
            TopologySpec::Dynamic { subgroup_size, .. } => self.agent_count.div_ceil(subgroup_size),
            _ => 1,
        }
    }

    pub fn home_of(&self, agent: usize) -> usize {
        self.home[agent]
    }

    /// Subgroup the agent is currently in (host while visiting).
    pub fn location_of(&self, agent: usize) -> usize {
        self.location[agent]
    }

    pub fn active_visits(&self) -> &[Visit] {
        &self.visits
    }

    pub fn is_visiting(&self, agent: usize) -> bool {
        self.location[agent] != self.home[agent]
    }

    /// Current neighbors, ascending. A visitor shares only its host's
    /// neighborhood; links to its home subgroup are severed for the visit.
    pub fn neighbors(&self, agent: usize) -> Vec<usize> {
        match &self.spec {
            TopologySpec::FullyConnected => (0..self.agent_count).filter(|&b| b != agent).collect(),
            TopologySpec::Dynamic { .. } => (0..self.agent_count)
                .filter(|&b| b != agent && self.location[b] == self.location[agent])
                .collect(),
            TopologySpec::Custom { .. } => self.adjacency[agent].iter().copied().collect(),
        }
    }

    pub fn are_neighbors(&self, a: usize, b: usize) -> bool {
        a != b
            && match &self.spec {
                TopologySpec::FullyConnected => true,
                TopologySpec::Dynamic { .. } => self.location[a] == self.location[b],
                TopologySpec::Custom { .. } => self.adjacency[a].contains(&b),
            }
    }

    /// Connected components of the neighbor relation, each ascending,
    /// ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.agent_count];
        let mut out = Vec::new();
        for start in 0..self.agent_count {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut i = 0;
            while i < comp.len() {
                for b in self.neighbors(comp[i]) {
                    if !seen[b] {
                        seen[b] = true;
                        comp.push(b);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn start_visit(
        &mut self,
        visitor: usize,
        host: usize,
        length: u32,
    ) -> Result<(), TopologyError> {
        let bad = TopologyError::BadVisit {
            agent: visitor,
            host,
        };
        if !matches!(self.spec, TopologySpec::Dynamic { .. })
            || visitor >= self.agent_count
            || host >= self.subgroup_count()
            || self.is_visiting(visitor)
            || host == self.home[visitor]
        {
            return Err(bad);
        }
        self.location[visitor] = host;
        self.visits.push(Visit {
            visitor,
            home: self.home[visitor],
            host,
            steps_remaining: length,
        });
        Ok(())
    }

    pub fn end_visit(&mut self, visitor: usize) -> Result<Visit, TopologyError> {
        let pos = self
            .visits
            .iter()
            .position(|v| v.visitor == visitor)
            .ok_or(TopologyError::NotVisiting(visitor))?;
        let v = self.visits.remove(pos);
        self.location[visitor] = v.home;
        Ok(v)
    }

    /// Applies recorded visit events in order instead of drawing new ones.
    pub fn apply_events(&mut self, events: &[VisitEvent]) -> Result<(), TopologyError> {
        let length = match self.spec {
            TopologySpec::Dynamic { visit_len, .. } => visit_len,
            _ => 0,
        };
        for e in events {
            match *e {
                VisitEvent::Start {
                    visitor,
                    home,
                    host,
                } => {
                    if self.home.get(visitor) != Some(&home) {
                        return Err(TopologyError::BadVisit {
                            agent: visitor,
                            host,
                        });
                    }
                    self.start_visit(visitor, host, length)?;
                }
                VisitEvent::End { visitor, .. } => {
                    self.end_visit(visitor)?;
                }
            }
        }
        Ok(())
    }

    /// Moves the schedule to `step`: active visits tick down (expired ones
    /// send the visitor home), then at every `visit_len` boundary each
    /// subgroup that was neither sending nor hosting, and has two or more
    /// residents, sends one uniformly chosen resident to a uniformly chosen
    /// other subgroup with probability `visit_prob`. Subgroups are processed
    /// in a seeded random order.
    pub fn advance<R: Rng + ?Sized>(&mut self, step: u32, rng: &mut R) -> Vec<VisitEvent> {
        let TopologySpec::Dynamic {
            visit_prob,
            visit_len,
            ..
        } = self.spec
        else {
            return Vec::new();
        };
        let mut events = Vec::new();
        for v in &mut self.visits {
            v.steps_remaining = v.steps_remaining.saturating_sub(1);
        }
        let expired: Vec<usize> = self
            .visits
            .iter()
            .filter(|v| v.steps_remaining == 0)
            .map(|v| v.visitor)
            .collect();
        for visitor in expired {
            let v = self.end_visit(visitor).expect("active visit");
            events.push(VisitEvent::End {
                visitor,
                home: v.home,
                host: v.host,
            });
        }

        let groups = self.subgroup_count();
        if !step.is_multiple_of(visit_len) || visit_prob <= 0.0 || groups < 2 {
            return events;
        }
        let busy: BTreeSet<usize> = self.visits.iter().flat_map(|v| [v.home, v.host]).collect();
        let mut order: Vec<usize> = (0..groups).collect();
        order.shuffle(rng);
        for s in order {
            if busy.contains(&s) {
                continue;
            }
            let residents: Vec<usize> = (0..self.agent_count)
                .filter(|&a| self.home[a] == s && self.location[a] == s)
                .collect();
            if residents.len() < 2 {
                continue;
            }
            if !rng.gen_bool(visit_prob) {
                continue;
            }
            let visitor = *residents.choose(rng).expect("residents");
            let mut host = rng.gen_range(0..groups - 1);
            if host >= s {
                host += 1;
            }
            self.start_visit(visitor, host, visit_len)
                .expect("eligible visit");
            events.push(VisitEvent::Start {
                visitor,
                home: s,
                host,
            });
        }
        events
    }
}

/// Functional form of [`GroupTopology::advance`].
pub fn advance_topology<R: Rng + ?Sized>(
    topo: &GroupTopology,
    step: u32,
    rng: &mut R,
) -> (GroupTopology, Vec<VisitEvent>) {
    let mut next = topo.clone();
    let events = next.advance(step, rng);
    (next, events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_symmetric(t: &GroupTopology) {
        for a in 0..t.agent_count() {
            for b in t.neighbors(a) {
                assert!(t.neighbors(b).contains(&a), "{a} -> {b}");
            }
        }
    }

    #[test]
    fn fully_connected_six() {
        let t = GroupTopology::new(6, TopologySpec::FullyConnected).unwrap();
        for a in 0..6 {
            assert_eq!(t.neighbors(a).len(), 5);
        }
        assert_eq!(t.components().len(), 1);
    }

    #[test]
    fn dynamic_six_without_visits() {
        let t = GroupTopology::new(6, TopologySpec::dynamic(0.2, 50)).unwrap();
        assert_eq!(t.subgroup_count(), 3);
        for a in 0..6 {
            assert_eq!(t.neighbors(a).len(), 1);
        }
        assert_eq!(t.components(), vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
    }

    #[test]
    fn visitor_joins_host() {
        let mut t = GroupTopology::new(6, TopologySpec::dynamic(0.2, 50)).unwrap();
        t.start_visit(0, 1, 50).unwrap();
        assert_eq!(t.neighbors(0), vec![2, 3]);
        assert!(t.neighbors(2).contains(&0));
        assert_eq!(t.neighbors(1), Vec::<usize>::new());
        assert_symmetric(&t);
        assert!(t.start_visit(0, 2, 50).is_err(), "one visit at a time");
        t.end_visit(0).unwrap();
        assert_eq!(t.neighbors(0), vec![1]);
    }

    #[test]
    fn zero_probability_is_static() {
        let mut t = GroupTopology::new(6, TopologySpec::dynamic(0.0, 50)).unwrap();
        let before = t.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for step in 0..400 {
            assert!(t.advance(step, &mut rng).is_empty());
        }
        assert_eq!(t, before);
    }

    #[test]
    fn certain_visits_at_boundary() {
        for seed in 0..50 {
            let mut t = GroupTopology::new(6, TopologySpec::dynamic(1.0, 50)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let events = t.advance(0, &mut rng);
            assert_eq!(events.len(), 3, "every subgroup sends");
            assert_eq!(t.active_visits().len(), 3);
            for g in 0..3 {
                let residents = (0..6)
                    .filter(|&a| t.home_of(a) == g && !t.is_visiting(a))
                    .count();
                assert_eq!(residents, 1, "no subgroup empties");
            }
            assert_symmetric(&t);
            for step in 1..50 {
                assert!(t.advance(step, &mut rng).is_empty());
            }
            let ends = t.advance(50, &mut rng);
            assert_eq!(
                ends.iter()
                    .filter(|e| matches!(e, VisitEvent::End { .. }))
                    .count(),
                3
            );
        }
    }

    #[test]
    fn odd_group_keeps_singleton_home() {
        let mut t = GroupTopology::new(5, TopologySpec::dynamic(1.0, 10)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        t.advance(0, &mut rng);
        assert!(!t.is_visiting(4));
        assert_symmetric(&t);
    }

    #[test]
    fn custom_adjacency_is_validated() {
        let spec = TopologySpec::Custom {
            adjacency: vec![vec![1], vec![]],
        };
        assert_eq!(
            GroupTopology::new(2, spec),
            Err(TopologyError::Asymmetric(0, 1))
        );
        let ring = TopologySpec::Custom {
            adjacency: vec![vec![1, 3], vec![0, 2], vec![1, 3], vec![2, 0]],
        };
        let t = GroupTopology::new(4, ring).unwrap();
        assert_eq!(t.neighbors(0), vec![1, 3]);
        assert_eq!(t.components().len(), 1);
    }

    #[test]
    fn config_block_parses() {
        let spec: TopologySpec =
            serde_json::from_str(r#"{"kind":"dynamic","visit_prob":0.2,"visit_len":50}"#).unwrap();
        assert_eq!(spec, TopologySpec::dynamic(0.2, 50));
    }
}
