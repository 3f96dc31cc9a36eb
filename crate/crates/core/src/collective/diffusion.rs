use std::collections::HashSet;

use super::GroupTopology;
use crate::env::{EpisodeState, Source};
use crate::kgraph::ItemId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiffusionEvent {
    pub to: usize,
    pub item: ItemId,
    /// Attributed first crafter within the component.
    pub source: usize,
}

fn attribution(states: &[EpisodeState], component: &[usize], item: ItemId) -> usize {
    let mut crafted: Option<(u32, usize)> = None;
    let mut earliest: Option<(u32, usize, usize)> = None;
    for &a in component {
        let Some(pos) = states[a].position(item) else {
            continue;
        };
        let acq = states[a].acquisitions()[pos];
        let origin = match acq.source {
            Source::Copied { from } => from,
            _ => a,
        };
        if acq.source == Source::Crafted && crafted.is_none_or(|c| (acq.step, a) < c) {
            crafted = Some((acq.step, a));
        }
        if earliest.is_none_or(|e| (acq.step, a) < (e.0, e.1)) {
            earliest = Some((acq.step, a, origin));
        }
    }
    crafted
        .map(|c| c.1)
        .or(earliest.map(|e| e.2))
        .expect("item held in component")
}

/// Perfect copy: within each connected component every inventory becomes
/// the union of the members' inventories. Idempotent for a fixed topology.
pub fn diffuse_perfect_copy(
    states: &mut [EpisodeState],
    topo: &GroupTopology,
    step: u32,
) -> Vec<DiffusionEvent> {
    let mut events = Vec::new();
    for component in topo.components() {
        if component.len() < 2 {
            continue;
        }
        let mut seen = HashSet::new();
        let mut union: Vec<(ItemId, usize)> = Vec::new();
        for &a in &component {
            for item in states[a].inventory() {
                if seen.insert(item) {
                    union.push((item, 0));
                }
            }
        }
        for entry in &mut union {
            entry.1 = attribution(states, &component, entry.0);
        }
        for &a in &component {
            for &(item, source) in &union {
                if states[a].receive(item, step, source) {
                    events.push(DiffusionEvent {
                        to: a,
                        item,
                        source,
                    });
                }
            }
        }
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collective::TopologySpec;
    use crate::env::make_open_ended_task;
    use crate::kgraph::{test_graph, Pair};

    #[test]
    fn union_within_components_only() {
        let g = test_graph(
            &["fire", "water", "steam", "earth", "mud"],
            &[("fire", "water", "steam"), ("earth", "water", "mud")],
        );
        let t = make_open_ended_task(&g, &["fire", "water", "earth"], 10).unwrap();
        let mut states: Vec<EpisodeState> = (0..4).map(|_| EpisodeState::new(&g, &t)).collect();
        let p = |a: &str, b: &str| Pair::new(g.id_of(a).unwrap(), g.id_of(b).unwrap());
        states[0].apply(&g, p("fire", "water")).unwrap();
        states[3].apply(&g, p("earth", "water")).unwrap();
        let topo = GroupTopology::new(4, TopologySpec::dynamic(0.0, 10)).unwrap();

        let events = diffuse_perfect_copy(&mut states, &topo, 0);
        assert_eq!(
            events,
            vec![
                DiffusionEvent {
                    to: 1,
                    item: g.id_of("steam").unwrap(),
                    source: 0
                },
                DiffusionEvent {
                    to: 2,
                    item: g.id_of("mud").unwrap(),
                    source: 3
                },
            ]
        );
        assert!(!states[2].holds(g.id_of("steam").unwrap()));
        assert!(
            diffuse_perfect_copy(&mut states, &topo, 0).is_empty(),
            "idempotent"
        );
        assert_eq!(
            states[1].valid_attempts().len(),
            0,
            "copies are not attempts"
        );
    }

    #[test]
    fn attribution_follows_copies_across_components() {
        let g = test_graph(&["fire", "water", "steam"], &[("fire", "water", "steam")]);
        let t = make_open_ended_task(&g, &["fire", "water"], 10).unwrap();
        let mut states: Vec<EpisodeState> = (0..4).map(|_| EpisodeState::new(&g, &t)).collect();
        let steam = g.id_of("steam").unwrap();
        states[0]
            .apply(
                &g,
                Pair::new(g.id_of("fire").unwrap(), g.id_of("water").unwrap()),
            )
            .unwrap();
        let mut topo = GroupTopology::new(4, TopologySpec::dynamic(0.0, 10)).unwrap();
        diffuse_perfect_copy(&mut states, &topo, 0);
        topo.start_visit(1, 1, 10).unwrap();
        let events = diffuse_perfect_copy(&mut states, &topo, 1);
        assert_eq!(events.len(), 2);
        assert!(events.iter().all(|e| e.item == steam && e.source == 0));
    }
}
