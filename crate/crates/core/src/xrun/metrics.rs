use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::log::{EventLog, OutcomeLabel, Record, VisitKind};
use super::RunError;
use crate::collective::{GroupTopology, TopologySpec, VisitEvent};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessStats {
    pub episodes: usize,
    pub mean: f64,
    /// Weighted mean of per-trial variances.
    pub within_trial_var: f64,
    /// Weighted variance of per-trial means.
    pub across_trial_var: f64,
    /// Variance over all episodes; equals within + across.
    pub total_var: f64,
    pub per_trial: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CopyTimeStats {
    pub samples: usize,
    pub censored: usize,
    pub mean: Option<f64>,
    /// copy time -> count
    pub histogram: BTreeMap<u32, usize>,
    /// Per step, mean over agents of items a neighbor held that the agent
    /// had not yet acquired.
    pub outstanding: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RepromptStats {
    pub decisions: usize,
    pub reprompts: usize,
    pub fallbacks: usize,
    pub mean_per_decision: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FinalInventory {
    pub mean: f64,
    pub per_trial: Vec<f64>,
}

/// Everything derived from one log. Recomputed on demand, never cached.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    /// Agent-episodes.
    pub episodes: usize,
    pub success: Option<SuccessStats>,
    /// Mean inventory size after each round; entry 0 is the initial size.
    pub inventory_curve: Vec<f64>,
    pub final_inventory: FinalInventory,
    pub copy_time: CopyTimeStats,
    pub repetitions_per_task: f64,
    pub reprompts: RepromptStats,
    pub aborted: usize,
}

struct Episode {
    trial: u32,
    horizon: u32,
    agents: usize,
    topology: TopologySpec,
    initial_len: usize,
    /// Per agent: non-initial item -> round it entered the inventory.
    acquired: Vec<HashMap<String, u32>>,
    visits: BTreeMap<u32, Vec<VisitEvent>>,
    ends: Vec<Option<End>>,
}

#[derive(Clone, Copy)]
struct End {
    success: Option<bool>,
    inventory: usize,
    repetitions: u32,
    aborted: bool,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn collect_episodes(log: &EventLog) -> Result<Vec<Episode>, RunError> {
    let mut eps: BTreeMap<(u32, u32), Episode> = BTreeMap::new();
    let missing = |trial, task| RunError::Log {
        line: 0,
        message: format!("record for trial {trial} task {task} before its task_start"),
    };
    for rec in &log.records {
        match rec {
            Record::TaskStart {
                trial,
                task,
                initial,
                horizon,
                agents,
                topology,
                ..
            } => {
                eps.insert(
                    (*trial, *task),
                    Episode {
                        trial: *trial,
                        horizon: *horizon,
                        agents: *agents,
                        topology: topology.clone(),
                        initial_len: initial.len(),
                        acquired: vec![HashMap::new(); *agents],
                        visits: BTreeMap::new(),
                        ends: vec![None; *agents],
                    },
                );
            }
            Record::StepOutcome {
                trial,
                task,
                agent,
                step,
                outcome: OutcomeLabel::NewItem,
                result,
            } => {
                let ep = eps
                    .get_mut(&(*trial, *task))
                    .ok_or_else(|| missing(*trial, *task))?;
                if let Some(item) = result {
                    ep.acquired[*agent].entry(item.clone()).or_insert(*step);
                }
            }
            Record::Diffusion {
                trial,
                task,
                agent,
                step,
                item,
                ..
            } => {
                let ep = eps
                    .get_mut(&(*trial, *task))
                    .ok_or_else(|| missing(*trial, *task))?;
                ep.acquired[*agent].entry(item.clone()).or_insert(*step);
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
                let ep = eps
                    .get_mut(&(*trial, *task))
                    .ok_or_else(|| missing(*trial, *task))?;
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
                ep.visits.entry(*step).or_default().push(ev);
            }
            Record::EpisodeEnd {
                trial,
                task,
                agent,
                success,
                inventory,
                repetitions,
                aborted,
                ..
            } => {
                let ep = eps
                    .get_mut(&(*trial, *task))
                    .ok_or_else(|| missing(*trial, *task))?;
                ep.ends[*agent] = Some(End {
                    success: *success,
                    inventory: *inventory,
                    repetitions: *repetitions,
                    aborted: *aborted,
                });
            }
            _ => {}
        }
    }
    Ok(eps.into_values().collect())
}

fn success_stats(eps: &[Episode]) -> Option<SuccessStats> {
    let mut by_trial: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for ep in eps {
        for end in ep.ends.iter().flatten() {
            if let Some(s) = end.success {
                by_trial
                    .entry(ep.trial)
                    .or_default()
                    .push(if s { 1.0 } else { 0.0 });
            }
        }
    }
    let all: Vec<f64> = by_trial.values().flatten().copied().collect();
    if all.is_empty() {
        return None;
    }
    let n = all.len() as f64;
    let m = mean(all.iter().copied());
    let total_var = mean(all.iter().map(|x| (x - m).powi(2)));
    let mut within = 0.0;
    let mut across = 0.0;
    let mut per_trial = Vec::new();
    for xs in by_trial.values() {
        let w = xs.len() as f64 / n;
        let mt = mean(xs.iter().copied());
        within += w * mean(xs.iter().map(|x| (x - mt).powi(2)));
        across += w * (mt - m).powi(2);
        per_trial.push(mt);
    }
    Some(SuccessStats {
        episodes: all.len(),
        mean: m,
        within_trial_var: within,
        across_trial_var: across,
        total_var,
        per_trial,
    })
}

fn inventory_curve(eps: &[Episode]) -> Vec<f64> {
    let len = eps
        .iter()
        .map(|e| e.horizon as usize + 1)
        .max()
        .unwrap_or(0);
    let mut sum = vec![0.0; len];
    let mut count = 0usize;
    for ep in eps {
        for acquired in &ep.acquired {
            let mut gains = vec![0usize; len];
            for &s in acquired.values() {
                if (s as usize) + 1 < len {
                    gains[s as usize + 1] += 1;
                }
            }
            let mut size = ep.initial_len;
            for (t, g) in gains.iter().enumerate() {
                size += g;
                sum[t] += size as f64;
            }
            count += 1;
        }
    }
    sum.iter().map(|s| s / count.max(1) as f64).collect()
}

/// Per (agent, item): exposure step t0 is the first round a then-neighbor
/// held the item while the agent did not yet; t1 is the agent's own
/// acquisition round. Items the agent held before any exposure do not count.
fn copy_times(eps: &[Episode]) -> Result<CopyTimeStats, RunError> {
    let mut stats = CopyTimeStats::default();
    let len = eps
        .iter()
        .filter(|e| e.agents > 1)
        .map(|e| e.horizon as usize)
        .max()
        .unwrap_or(0);
    let mut outstanding = vec![0.0; len];
    let mut groups = 0usize;
    let mut total = 0u64;
    for ep in eps.iter().filter(|e| e.agents > 1) {
        groups += 1;
        let mut topo = GroupTopology::new(ep.agents, ep.topology.clone())
            .map_err(|e| RunError::Config(e.to_string()))?;
        let mut exposed: Vec<HashMap<&str, u32>> = vec![HashMap::new(); ep.agents];
        for s in 0..ep.horizon {
            if let Some(events) = ep.visits.get(&s) {
                topo.apply_events(events)?;
            }
            for (a, seen) in exposed.iter_mut().enumerate() {
                for b in topo.neighbors(a) {
                    for (item, &sb) in &ep.acquired[b] {
                        if sb > s || seen.contains_key(item.as_str()) {
                            continue;
                        }
                        if ep.acquired[a].get(item).is_some_and(|&sa| sa < s) {
                            continue;
                        }
                        seen.insert(item, s);
                    }
                }
            }
        }
        let mut open = vec![0i64; len + 1];
        for (a, seen) in exposed.iter().enumerate() {
            for (item, &t0) in seen {
                match ep.acquired[a].get(*item) {
                    Some(&t1) => {
                        let dt = t1 - t0;
                        *stats.histogram.entry(dt).or_default() += 1;
                        stats.samples += 1;
                        total += u64::from(dt);
                        open[t0 as usize] += 1;
                        open[t1 as usize] -= 1;
                    }
                    None => {
                        stats.censored += 1;
                        open[t0 as usize] += 1;
                    }
                }
            }
        }
        let mut running = 0i64;
        for (t, slot) in outstanding.iter_mut().enumerate().take(ep.horizon as usize) {
            running += open[t];
            *slot += running as f64 / ep.agents as f64;
        }
    }
    if groups > 0 {
        for v in &mut outstanding {
            *v /= groups as f64;
        }
    }
    stats.outstanding = outstanding;
    stats.mean = (stats.samples > 0).then(|| total as f64 / stats.samples as f64);
    Ok(stats)
}

/// Pure function of the log.
pub fn compute_metrics(log: &EventLog) -> Result<MetricsSummary, RunError> {
    let eps = collect_episodes(log)?;
    let ends: Vec<(u32, End)> = eps
        .iter()
        .flat_map(|e| e.ends.iter().flatten().map(move |end| (e.trial, *end)))
        .collect();

    let mut by_trial: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (trial, end) in &ends {
        by_trial
            .entry(*trial)
            .or_default()
            .push(end.inventory as f64);
    }
    let final_inventory = FinalInventory {
        mean: mean(ends.iter().map(|(_, e)| e.inventory as f64)),
        per_trial: by_trial
            .values()
            .map(|xs| mean(xs.iter().copied()))
            .collect(),
    };

    let mut reprompts = RepromptStats::default();
    for rec in &log.records {
        if let Record::Decision {
            reprompts_used,
            fallback_used,
            ..
        } = rec
        {
            reprompts.decisions += 1;
            reprompts.reprompts += *reprompts_used as usize;
            reprompts.fallbacks += usize::from(*fallback_used);
        }
    }
    if reprompts.decisions > 0 {
        reprompts.mean_per_decision = reprompts.reprompts as f64 / reprompts.decisions as f64;
    }

    Ok(MetricsSummary {
        episodes: ends.len(),
        success: success_stats(&eps),
        inventory_curve: inventory_curve(&eps),
        final_inventory,
        copy_time: copy_times(&eps)?,
        repetitions_per_task: mean(ends.iter().map(|(_, e)| f64::from(e.repetitions))),
        reprompts,
        aborted: ends.iter().filter(|(_, e)| e.aborted).count(),
    })
}
