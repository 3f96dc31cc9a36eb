use super::{EpisodeState, Task};
use crate::collective::SocialView;
use crate::kgraph::{ItemId, KnowledgeGraph, Pair};

pub const CURRENT_TASK_HEADER: &str = "<Current task>";

fn quoted(g: &KnowledgeGraph, item: ItemId) -> String {
    format!("'{}'", g.name(item))
}

/// `'x' and 'y'`
pub fn render_pair(g: &KnowledgeGraph, pair: Pair) -> String {
    format!(
        "{} and {}",
        quoted(g, pair.first()),
        quoted(g, pair.second())
    )
}

fn render_valid(g: &KnowledgeGraph, pair: Pair, result: ItemId) -> String {
    format!("{} -> {}", render_pair(g, pair), quoted(g, result))
}

/// The output line a well-behaved model emits for `pair`.
pub fn render_combination_line(g: &KnowledgeGraph, pair: Pair) -> String {
    format!("Combination: {}", render_pair(g, pair))
}

fn line(label: &str, entries: impl IntoIterator<Item = String>) -> String {
    let body = entries.into_iter().collect::<Vec<_>>().join(", ");
    if body.is_empty() {
        format!("{label}:")
    } else {
        format!("{label}: {body}")
    }
}

/// Renders the task-state block. Pure in `(task, state, social)`.
pub fn render_state_prompt(
    g: &KnowledgeGraph,
    task: &Task,
    state: &EpisodeState,
    social: Option<&SocialView>,
) -> String {
    let mut lines = vec![CURRENT_TASK_HEADER.to_string()];
    lines.push(line("Inventory", state.inventory().map(|i| quoted(g, i))));
    if let Some(target) = task.target {
        lines.push(format!("Target: {}", quoted(g, target)));
    }
    lines.push(format!("Remaining rounds: {}", state.remaining()));
    lines.push(line(
        "Task valid combinations",
        state
            .valid_attempts()
            .iter()
            .map(|a| render_valid(g, a.pair, a.result)),
    ));
    lines.push(line(
        "Task invalid combinations",
        state
            .invalid_attempts()
            .iter()
            .map(|a| render_pair(g, a.pair)),
    ));
    if let Some(view) = social {
        lines.push(line(
            "Other players' valid combinations",
            view.others_valid
                .iter()
                .map(|&(pair, result)| render_valid(g, pair, result)),
        ));
        lines.push(line(
            "Other players' invalid combinations",
            view.others_invalid.iter().map(|&p| render_pair(g, p)),
        ));
    }
    lines.join("\n")
}
