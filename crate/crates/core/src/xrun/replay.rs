use std::collections::{BTreeMap, HashMap, VecDeque};

use rand_chacha::ChaCha8Rng;

use super::log::{EventLog, Record, VisitKind};
use super::runner::{make_header, run_episode};
use super::RunError;
use crate::agents::{AgentError, Decision, Observation, Policy, Reprompt};
use crate::collective::VisitEvent;
use crate::env::{Task, TaskRecord};
use crate::kgraph::{KnowledgeGraph, Pair};

enum Scripted {
    Decide(Decision),
    Fail(String),
}

/// Hands back logged decisions in order.
struct ReplayPolicy {
    queue: VecDeque<Scripted>,
}

impl Policy for ReplayPolicy {
    fn decide(
        &mut self,
        _g: &KnowledgeGraph,
        obs: &Observation<'_>,
        _rng: &mut ChaCha8Rng,
    ) -> Result<Decision, AgentError> {
        match self.queue.pop_front() {
            Some(Scripted::Decide(d)) => Ok(d),
            Some(Scripted::Fail(e)) => Err(AgentError::Replayed(e)),
            None => Err(AgentError::Replayed(format!(
                "log has no decision for step {}",
                obs.state.step()
            ))),
        }
    }

    fn name(&self) -> &'static str {
        "replay"
    }
}

#[derive(Default)]
struct EpisodeScript {
    task: Option<TaskRecord>,
    agents: BTreeMap<usize, VecDeque<Scripted>>,
    visits: BTreeMap<u32, Vec<VisitEvent>>,
}

fn resolve_pair(g: &KnowledgeGraph, first: &str, second: &str) -> Result<Pair, RunError> {
    let a = g.resolve(first, "logged decision")?;
    let b = g.resolve(second, "logged decision")?;
    Ok(Pair::new(a, b))
}

fn scripts(
    log: &EventLog,
    g: &KnowledgeGraph,
) -> Result<BTreeMap<(u32, u32), EpisodeScript>, RunError> {
    let mut eps: BTreeMap<(u32, u32), EpisodeScript> = BTreeMap::new();
    let mut pending: HashMap<(u32, u32, usize), Vec<Reprompt>> = HashMap::new();
    let mut decided_at: HashMap<(u32, u32, usize), u32> = HashMap::new();
    for rec in &log.records {
        match rec {
            Record::TaskStart {
                trial,
                task,
                task_id,
                initial,
                target,
                horizon,
                depth,
                distractors,
                ..
            } => {
                eps.entry((*trial, *task)).or_default().task = Some(TaskRecord {
                    task_id: task_id.clone(),
                    initial_items: initial.clone(),
                    target: target.clone(),
                    horizon: *horizon,
                    depth: *depth,
                    distractors: *distractors,
                });
            }
            Record::Reprompt {
                trial,
                task,
                agent,
                reason,
                raw,
                ..
            } => pending
                .entry((*trial, *task, *agent))
                .or_default()
                .push(Reprompt {
                    reason: *reason,
                    raw: raw.clone(),
                }),
            Record::Decision {
                trial,
                task,
                agent,
                step,
                first,
                second,
                reasoning,
                reprompts_used,
                fallback_used,
            } => {
                let key = (*trial, *task, *agent);
                let decision = Decision {
                    action: resolve_pair(g, first, second)?,
                    reasoning: reasoning.clone(),
                    reprompts_used: *reprompts_used,
                    fallback_used: *fallback_used,
                    reprompts: pending.remove(&key).unwrap_or_default(),
                };
                decided_at.insert(key, *step);
                eps.entry((*trial, *task))
                    .or_default()
                    .agents
                    .entry(*agent)
                    .or_default()
                    .push_back(Scripted::Decide(decision));
            }
            Record::Abort {
                trial,
                task,
                agent,
                step,
                error,
            } => {
                // an abort after a logged decision came from applying it and
                // will recur by itself
                if decided_at.get(&(*trial, *task, *agent)) != Some(step) {
                    eps.entry((*trial, *task))
                        .or_default()
                        .agents
                        .entry(*agent)
                        .or_default()
                        .push_back(Scripted::Fail(error.clone()));
                }
            }
            Record::Visit {
                trial,
                task,
                agent,
                step,
                event,
                home,
                host,
            } => {
                let (visitor, home, host) = (*agent, *home, *host);
                let ev = match event {
                    VisitKind::Start => VisitEvent::Start {
                        visitor,
                        home,
                        host,
                    },
                    VisitKind::End => VisitEvent::End {
                        visitor,
                        home,
                        host,
                    },
                };
                eps.entry((*trial, *task))
                    .or_default()
                    .visits
                    .entry(*step)
                    .or_default()
                    .push(ev);
            }
            _ => {}
        }
    }
    Ok(eps)
}

/// Re-executes a log: logged decisions and visits drive the real engine,
/// which regenerates every outcome, diffusion and summary record. A
/// faithful log replays to identical bytes.
pub fn replay_log(log: &EventLog, g: &KnowledgeGraph) -> Result<EventLog, RunError> {
    let cfg = &log.header.config;
    let header = make_header(cfg, g);
    if header != log.header {
        return Err(RunError::Replay(
            "log header does not match this graph and config".into(),
        ));
    }
    let mut records = Vec::with_capacity(log.records.len());
    for ((trial, k), script) in scripts(log, g)? {
        let rec = script
            .task
            .ok_or_else(|| RunError::Replay(format!("trial {trial} task {k} has no task_start")))?;
        let task: Task = rec.resolve(g)?;
        let mut agents = script.agents;
        let mut policies: Vec<ReplayPolicy> = (0..cfg.group.size)
            .map(|a| ReplayPolicy {
                queue: agents.remove(&a).unwrap_or_default(),
            })
            .collect();
        run_episode(
            g,
            cfg,
            trial,
            k,
            &task,
            &mut policies,
            Some(script.visits),
            &mut records,
        )?;
    }
    Ok(EventLog { header, records })
}
