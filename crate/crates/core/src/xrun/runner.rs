use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::config::{AgentSpec, ClientFactory, RunConfig, TaskSpec};
use super::log::{EventLog, Header, OutcomeLabel, Record, VisitKind, LOG_FORMAT};
use super::metrics::{compute_metrics, MetricsSummary};
use super::RunError;
use crate::agents::{Policy, PromptAssets};
use crate::collective::{run_round, AgentEvent, GroupState, GroupTopology, VisitEvent};
use crate::env::{make_open_ended_task, OutcomeKind, Task, TaskSampler};
use crate::kgraph::KnowledgeGraph;
use crate::llm_client::ChatClient;
use crate::util::substream;

// Substream namespaces under the run seed.
const STREAM_TASKS: u64 = 0;
const STREAM_AGENT: u64 = 1;
const STREAM_TOPOLOGY: u64 = 2;

pub struct RunOutput {
    pub log: EventLog,
    pub metrics: MetricsSummary,
    pub tasks: Vec<Task>,
}

/// The task batch shared by every trial: sampled once from the run seed for
/// targeted specs, a single fixed task for open-ended ones.
pub fn prepare_tasks(cfg: &RunConfig, g: &KnowledgeGraph) -> Result<Vec<Task>, RunError> {
    match &cfg.task {
        TaskSpec::Targeted {
            depth,
            distractors,
            tasks_per_trial,
            horizon,
        } => {
            let sampler = TaskSampler::new(g);
            let spec = crate::env::TargetedSpec {
                depth: *depth,
                distractors: *distractors,
                horizon: *horizon,
            };
            let mut rng = substream(cfg.seed, &[STREAM_TASKS]);
            (0..*tasks_per_trial)
                .map(|_| sampler.sample(spec, &mut rng).map_err(RunError::from))
                .collect()
        }
        TaskSpec::OpenEnded { initial, horizon } => {
            let names: Vec<&str> = initial.iter().map(String::as_str).collect();
            Ok(vec![make_open_ended_task(g, &names, *horizon)?])
        }
    }
}

/// Log header for a run. The output location does not affect results and is
/// left out, so identical runs written to different places log identically.
pub fn make_header(cfg: &RunConfig, g: &KnowledgeGraph) -> Header {
    let cfg = RunConfig {
        output_dir: None,
        ..cfg.clone()
    };
    Header {
        format: LOG_FORMAT.into(),
        config_hash: cfg.content_hash(),
        graph_hash: g.content_hash(),
        prompt_hash: cfg.agent.is_llm().then(|| PromptAssets::default().hash()),
        config: cfg,
    }
}

pub fn run_experiment(
    cfg: &RunConfig,
    g: &KnowledgeGraph,
    clients: Option<&dyn ClientFactory>,
) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let tasks = prepare_tasks(cfg, g)?;
    run_with_tasks(cfg, g, tasks, clients)
}

/// Runs every trial over a fixed task batch. Trials run concurrently and
/// their records are merged in trial order.
pub fn run_with_tasks(
    cfg: &RunConfig,
    g: &KnowledgeGraph,
    tasks: Vec<Task>,
    clients: Option<&dyn ClientFactory>,
) -> Result<RunOutput, RunError> {
    let shards: Vec<Vec<Record>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut policies = build_policies(&cfg.agent, cfg.group.size, trial, clients)?;
            let mut out = Vec::new();
            for (k, task) in tasks.iter().enumerate() {
                run_episode(g, cfg, trial, k as u32, task, &mut policies, None, &mut out)?;
            }
            Ok(out)
        })
        .collect::<Result<_, RunError>>()?;
    let log = EventLog {
        header: make_header(cfg, g),
        records: shards.into_iter().flatten().collect(),
    };
    let metrics = compute_metrics(&log)?;
    Ok(RunOutput {
        log,
        metrics,
        tasks,
    })
}

fn build_policies(
    agent: &AgentSpec,
    n: usize,
    trial: u32,
    clients: Option<&dyn ClientFactory>,
) -> Result<Vec<Box<dyn Policy>>, RunError> {
    (0..n)
        .map(|a| {
            let client: Option<Arc<dyn ChatClient>> = match (agent.is_llm(), clients) {
                (true, Some(f)) => Some(f.client(trial, a)?),
                _ => None,
            };
            agent.build(client)
        })
        .collect()
}

fn outcome_label(kind: OutcomeKind) -> (OutcomeLabel, Option<crate::kgraph::ItemId>) {
    match kind {
        OutcomeKind::NewItem(r) => (OutcomeLabel::NewItem, Some(r)),
        OutcomeKind::DuplicateResult(r) => (OutcomeLabel::DuplicateResult, Some(r)),
        OutcomeKind::InvalidCombo => (OutcomeLabel::Invalid, None),
        OutcomeKind::RepeatedAttempt => (OutcomeLabel::Repeated, None),
    }
}

fn visit_records(trial: u32, task: u32, step: u32, events: &[VisitEvent], out: &mut Vec<Record>) {
    for e in events {
        let (event, visitor, home, host) = match *e {
            VisitEvent::Start {
                visitor,
                home,
                host,
            } => (VisitKind::Start, visitor, home, host),
            VisitEvent::End {
                visitor,
                home,
                host,
            } => (VisitKind::End, visitor, home, host),
        };
        out.push(Record::Visit {
            trial,
            task,
            agent: visitor,
            step,
            event,
            home,
            host,
        });
    }
}

/// Plays one task with one group and appends its records. With `script`,
/// visits come from the given events instead of the topology stream.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_episode<P: Policy>(
    g: &KnowledgeGraph,
    cfg: &RunConfig,
    trial: u32,
    k: u32,
    task: &Task,
    policies: &mut [P],
    script: Option<BTreeMap<u32, Vec<VisitEvent>>>,
    out: &mut Vec<Record>,
) -> Result<(), RunError> {
    let n = cfg.group.size;
    let topology = GroupTopology::new(n, cfg.group.topology.clone())
        .map_err(|e| RunError::Config(e.to_string()))?;
    let rngs = (0..n as u64)
        .map(|a| substream(cfg.seed, &[STREAM_AGENT, u64::from(trial), u64::from(k), a]))
        .collect();
    let copy = cfg.group.copy_mechanism;
    let (mut group, visits) = match script {
        None => {
            let topo_rng = substream(cfg.seed, &[STREAM_TOPOLOGY, u64::from(trial), u64::from(k)]);
            GroupState::new(g, task.clone(), topology, copy, rngs, topo_rng)
        }
        Some(script) => {
            GroupState::with_visit_script(g, task.clone(), topology, copy, rngs, script)?
        }
    };
    let name = |i| g.name(i).to_string();
    out.push(Record::TaskStart {
        trial,
        task: k,
        step: 0,
        task_id: task.task_id.clone(),
        initial: task.initial_items.iter().map(|&i| name(i)).collect(),
        target: task.target.map(name),
        horizon: task.horizon,
        depth: task.depth,
        distractors: task.distractors,
        agents: n,
        topology: cfg.group.topology.clone(),
        copy,
    });
    visit_records(trial, k, 0, &visits, out);

    while !group.is_finished() {
        let report = run_round(g, &mut group, policies)?;
        let step = report.round;
        for ev in report.agents {
            match ev {
                AgentEvent::Acted {
                    agent,
                    decision,
                    outcome,
                } => {
                    for r in &decision.reprompts {
                        out.push(Record::Reprompt {
                            trial,
                            task: k,
                            agent,
                            step,
                            reason: r.reason,
                            raw: r.raw.clone(),
                        });
                    }
                    out.push(Record::Decision {
                        trial,
                        task: k,
                        agent,
                        step,
                        first: name(decision.action.first()),
                        second: name(decision.action.second()),
                        reasoning: decision.reasoning,
                        reprompts_used: decision.reprompts_used,
                        fallback_used: decision.fallback_used,
                    });
                    let (label, result) = outcome_label(outcome);
                    out.push(Record::StepOutcome {
                        trial,
                        task: k,
                        agent,
                        step,
                        outcome: label,
                        result: result.map(name),
                    });
                }
                AgentEvent::Aborted { agent, error } => out.push(Record::Abort {
                    trial,
                    task: k,
                    agent,
                    step,
                    error,
                }),
            }
        }
        for d in &report.diffusion {
            out.push(Record::Diffusion {
                trial,
                task: k,
                agent: d.to,
                step,
                item: name(d.item),
                source: d.source,
            });
        }
        visit_records(trial, k, step + 1, &report.visits, out);
    }

    for (a, s) in group.states.iter().enumerate() {
        out.push(Record::EpisodeEnd {
            trial,
            task: k,
            agent: a,
            step: s.step(),
            success: task.target.map(|t| s.holds(t)),
            inventory: s.inventory_len(),
            repetitions: s.repetition_count(),
            aborted: group.aborted[a].is_some(),
        });
    }
    Ok(())
}
