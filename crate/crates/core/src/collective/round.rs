use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    diffuse_perfect_copy, social_view, DiffusionEvent, GroupTopology, TopologyError, VisitEvent,
};
use crate::agents::{Decision, Observation, Policy};
use crate::env::{EpisodeState, OutcomeKind, Task};
use crate::kgraph::KnowledgeGraph;

/// Everything that evolves while a group works on one task.
pub struct GroupState {
    pub task: Task,
    pub states: Vec<EpisodeState>,
    pub topology: GroupTopology,
    pub copy: bool,
    /// Error text for agents whose episode was cut short.
    pub aborted: Vec<Option<String>>,
    pub round: u32,
    agent_rngs: Vec<ChaCha8Rng>,
    schedule: Schedule,
}

/// Where topology changes come from.
enum Schedule {
    Random(Box<ChaCha8Rng>),
    /// Recorded events keyed by the step they take effect.
    Scripted(BTreeMap<u32, Vec<VisitEvent>>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AgentEvent {
    Acted {
        agent: usize,
        decision: Decision,
        outcome: OutcomeKind,
    },
    Aborted {
        agent: usize,
        error: String,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoundReport {
    pub round: u32,
    pub agents: Vec<AgentEvent>,
    pub diffusion: Vec<DiffusionEvent>,
    /// Topology changes made when moving to the next round.
    pub visits: Vec<VisitEvent>,
}

impl GroupState {
    /// Starts every agent on its own copy of `task` and runs the step-0
    /// topology update. Returns the visits it scheduled.
    pub fn new(
        g: &KnowledgeGraph,
        task: Task,
        topology: GroupTopology,
        copy: bool,
        agent_rngs: Vec<ChaCha8Rng>,
        topo_rng: ChaCha8Rng,
    ) -> (Self, Vec<VisitEvent>) {
        Self::start(
            g,
            task,
            topology,
            copy,
            agent_rngs,
            Schedule::Random(Box::new(topo_rng)),
        )
        .expect("random schedule cannot fail")
    }

    /// Like [`GroupState::new`] but replays `script` instead of sampling visits.
    pub fn with_visit_script(
        g: &KnowledgeGraph,
        task: Task,
        topology: GroupTopology,
        copy: bool,
        agent_rngs: Vec<ChaCha8Rng>,
        script: BTreeMap<u32, Vec<VisitEvent>>,
    ) -> Result<(Self, Vec<VisitEvent>), TopologyError> {
        Self::start(
            g,
            task,
            topology,
            copy,
            agent_rngs,
            Schedule::Scripted(script),
        )
    }

    fn start(
        g: &KnowledgeGraph,
        task: Task,
        topology: GroupTopology,
        copy: bool,
        agent_rngs: Vec<ChaCha8Rng>,
        schedule: Schedule,
    ) -> Result<(Self, Vec<VisitEvent>), TopologyError> {
        let n = topology.agent_count();
        assert_eq!(agent_rngs.len(), n, "one rng per agent");
        let states = (0..n).map(|_| EpisodeState::new(g, &task)).collect();
        let mut group = GroupState {
            task,
            states,
            topology,
            copy,
            aborted: vec![None; n],
            round: 0,
            agent_rngs,
            schedule,
        };
        let visits = group.advance_topology(0)?;
        Ok((group, visits))
    }

    fn advance_topology(&mut self, step: u32) -> Result<Vec<VisitEvent>, TopologyError> {
        match &mut self.schedule {
            Schedule::Random(rng) => Ok(self.topology.advance(step, rng.as_mut())),
            Schedule::Scripted(script) => {
                let events = script.remove(&step).unwrap_or_default();
                self.topology.apply_events(&events)?;
                Ok(events)
            }
        }
    }

    pub fn agent_count(&self) -> usize {
        self.states.len()
    }

    /// Still acting: not aborted, budget left, and target not yet held.
    pub fn is_active(&self, agent: usize) -> bool {
        let s = &self.states[agent];
        self.aborted[agent].is_none()
            && !s.is_over()
            && self.task.target.is_none_or(|t| !s.holds(t))
    }

    pub fn is_finished(&self) -> bool {
        (0..self.agent_count()).all(|a| !self.is_active(a))
    }
}

/// One synchronous round: snapshot observations, decide (concurrently),
/// apply in agent-id order, diffuse, then advance the topology. Only a
/// scripted visit schedule can fail.
pub fn run_round<P: Policy>(
    g: &KnowledgeGraph,
    group: &mut GroupState,
    policies: &mut [P],
) -> Result<RoundReport, TopologyError> {
    let n = group.agent_count();
    assert_eq!(policies.len(), n, "one policy per agent");
    let round = group.round;
    let active: Vec<bool> = (0..n).map(|a| group.is_active(a)).collect();

    let decisions: Vec<Option<Result<Decision, String>>> = {
        let states = &group.states;
        let topo = &group.topology;
        let task = &group.task;
        policies
            .par_iter_mut()
            .zip(group.agent_rngs.par_iter_mut())
            .enumerate()
            .map(|(a, (policy, rng))| {
                if !active[a] {
                    return None;
                }
                let view = policy
                    .wants_social_view()
                    .then(|| social_view(states, topo, a));
                let obs = Observation {
                    task,
                    state: &states[a],
                    social: view.as_ref(),
                };
                Some(policy.decide(g, &obs, rng).map_err(|e| e.to_string()))
            })
            .collect()
    };

    let mut report = RoundReport {
        round,
        ..RoundReport::default()
    };
    for (a, decision) in decisions.into_iter().enumerate() {
        let Some(decision) = decision else { continue };
        let applied = decision.and_then(|d| {
            let state = &mut group.states[a];
            let out = state.apply(g, d.action).map_err(|e| e.to_string())?;
            if out.kind == OutcomeKind::RepeatedAttempt {
                state.consume_repeated_step().map_err(|e| e.to_string())?;
            }
            Ok((d, out.kind))
        });
        match applied {
            Ok((decision, outcome)) => report.agents.push(AgentEvent::Acted {
                agent: a,
                decision,
                outcome,
            }),
            Err(error) => {
                log::warn!("agent {a} aborted in round {round}: {error}");
                group.aborted[a] = Some(error.clone());
                report.agents.push(AgentEvent::Aborted { agent: a, error });
            }
        }
    }

    if group.copy {
        report.diffusion = diffuse_perfect_copy(&mut group.states, &group.topology, round);
    }
    group.round += 1;
    report.visits = group.advance_topology(group.round)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::RandomPolicy;
    use crate::collective::TopologySpec;
    use crate::env::make_open_ended_task;
    use crate::kgraph::test_graph;
    use crate::util::substream;

    fn group(
        g: &KnowledgeGraph,
        n: usize,
        spec: TopologySpec,
        copy: bool,
        seed: u64,
    ) -> GroupState {
        let t = make_open_ended_task(g, &["fire", "water", "earth"], 30).unwrap();
        let topo = GroupTopology::new(n, spec).unwrap();
        let rngs = (0..n as u64).map(|a| substream(seed, &[a])).collect();
        GroupState::new(g, t, topo, copy, rngs, substream(seed, &[999])).0
    }

    fn graph() -> KnowledgeGraph {
        test_graph(
            &[
                "fire", "water", "earth", "steam", "mud", "lava", "cloud", "rain",
            ],
            &[
                ("fire", "water", "steam"),
                ("earth", "water", "mud"),
                ("earth", "fire", "lava"),
                ("steam", "steam", "cloud"),
                ("cloud", "water", "rain"),
            ],
        )
    }

    #[test]
    fn fully_connected_copy_keeps_inventories_identical() {
        let g = graph();
        let mut grp = group(&g, 4, TopologySpec::FullyConnected, true, 3);
        let mut pol = vec![RandomPolicy; 4];
        while !grp.is_finished() {
            run_round(&g, &mut grp, &mut pol).unwrap();
            let first: std::collections::BTreeSet<_> = grp.states[0].inventory().collect();
            for s in &grp.states {
                assert_eq!(first, s.inventory().collect());
            }
        }
        assert!(grp.states.iter().all(|s| s.step() == 30));
    }

    #[test]
    fn without_copy_items_are_local() {
        let g = graph();
        let mut grp = group(&g, 3, TopologySpec::FullyConnected, false, 4);
        let mut pol = vec![RandomPolicy; 3];
        while !grp.is_finished() {
            run_round(&g, &mut grp, &mut pol).unwrap();
        }
        for s in &grp.states {
            for item in s.inventory() {
                let local = grp.task.initial_items.contains(&item)
                    || s.valid_attempts().iter().any(|v| v.result == item);
                assert!(local);
            }
        }
    }

    #[test]
    fn same_seed_same_history() {
        let g = graph();
        let run = |seed| {
            let mut grp = group(&g, 6, TopologySpec::dynamic(0.5, 5), true, seed);
            let mut pol = vec![RandomPolicy; 6];
            let mut reports = Vec::new();
            while !grp.is_finished() {
                reports.push(run_round(&g, &mut grp, &mut pol).unwrap());
            }
            reports
        };
        assert_eq!(run(11), run(11));
    }

    #[test]
    fn single_agent_matches_plain_episode() {
        let g = graph();
        let mut grp = group(&g, 1, TopologySpec::FullyConnected, true, 5);
        let mut pol = vec![RandomPolicy];
        let mut solo = EpisodeState::new(&g, &grp.task);
        let mut rng = substream(5, &[0]);
        while !grp.is_finished() {
            let d = crate::agents::random_policy(
                &Observation {
                    task: &grp.task,
                    state: &solo,
                    social: None,
                },
                &mut rng,
            )
            .unwrap();
            solo.apply(&g, d.action).unwrap();
            run_round(&g, &mut grp, &mut pol).unwrap();
            assert_eq!(grp.states[0], solo);
        }
    }
}
