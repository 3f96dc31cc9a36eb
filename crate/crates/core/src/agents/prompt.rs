use serde::{Deserialize, Serialize};

use super::Observation;
use crate::env::render_state_prompt;
use crate::kgraph::{normalize_name, KnowledgeGraph};
use crate::llm_client::ChatMessage;

const INTRO: &str = include_str!("../../assets/prompts/intro.txt");
const REPEAT: &str = include_str!("../../assets/prompts/repeat.txt");
const FORMAT: &str = include_str!("../../assets/prompts/format.txt");
const PREDICTION: &str = include_str!("../../assets/prompts/prediction.txt");

/// Versioned prompt text. `hash` covers every template and goes into run logs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptAssets {
    pub intro: String,
    pub repeat: String,
    pub format: String,
    pub prediction: String,
}

impl Default for PromptAssets {
    fn default() -> Self {
        PromptAssets {
            intro: INTRO.trim_end().to_string(),
            repeat: REPEAT.trim_end().to_string(),
            format: FORMAT.trim_end().to_string(),
            prediction: PREDICTION.trim_end().to_string(),
        }
    }
}

fn fill(template: &str, first: &str, second: &str) -> String {
    template
        .replace("{first}", first)
        .replace("{second}", second)
}

impl PromptAssets {
    pub fn hash(&self) -> String {
        let mut buf = Vec::new();
        for part in [&self.intro, &self.repeat, &self.format, &self.prediction] {
            buf.extend_from_slice(part.as_bytes());
            buf.push(0);
        }
        crate::util::sha256_hex(&buf)
    }

    pub fn repeat_message(&self, first: &str, second: &str) -> String {
        fill(&self.repeat, first, second)
    }

    pub fn prediction_message(&self, first: &str, second: &str) -> String {
        fill(&self.prediction, first, second)
    }
}

/// Intro as the system message, the rendered state block as the user message.
/// No history is carried between steps; the state block summarizes it.
pub fn build_llm_messages(
    g: &KnowledgeGraph,
    intro: &str,
    obs: &Observation<'_>,
) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(intro),
        ChatMessage::user(render_state_prompt(g, obs.task, obs.state, obs.social)),
    ]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseTolerance {
    /// Only `'x' and 'y'` with both names quoted.
    Strict,
    /// Also unquoted names and `,`, `+`, `&`, `with` separators.
    #[default]
    Lenient,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedOutput {
    /// Normalized names, both present in the inventory.
    pub first: String,
    pub second: String,
    pub reasoning: Option<String>,
}

/// Strips markdown emphasis and heading marks around a line.
fn clean(line: &str) -> &str {
    line.trim()
        .trim_matches(|c| c == '*' || c == '#' || c == '_' || c == '-' || c == ' ')
}

/// Returns the text after `label` and its colon, if the line carries that label.
fn labelled<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let line = clean(line);
    let head = line.get(..label.len())?;
    if !head.eq_ignore_ascii_case(label) {
        return None;
    }
    let rest = line[label.len()..].trim_start_matches(['*', '_', ' ']);
    let rest = rest.strip_prefix(':')?;
    Some(
        rest.trim_start_matches(':')
            .trim_start_matches(['*', '_'])
            .trim(),
    )
}

fn unquote(s: &str, strict: bool) -> Option<&str> {
    let s = s.trim();
    for q in ['\'', '"', '`', '\u{2018}', '\u{201c}'] {
        let close = match q {
            '\u{2018}' => '\u{2019}',
            '\u{201c}' => '\u{201d}',
            other => other,
        };
        if let Some(inner) = s.strip_prefix(q).and_then(|r| r.strip_suffix(close)) {
            return Some(inner);
        }
    }
    if strict {
        None
    } else {
        Some(s)
    }
}

/// Reads the `Combination:` line of a completion. Returns `None` when there is
/// no such line, a name is not in `inventory`, or the split is ambiguous.
pub fn parse_llm_output(
    text: &str,
    inventory: &[String],
    tolerance: ParseTolerance,
) -> Option<ParsedOutput> {
    let strict = tolerance == ParseTolerance::Strict;
    let lines: Vec<&str> = text.lines().collect();
    let (idx, body) = lines
        .iter()
        .enumerate()
        .find_map(|(i, l)| labelled(l, "combination").map(|b| (i, b)))?;
    let body = body.trim_end_matches(['.', '*', ' ']);

    let mut separators = vec![" and "];
    if !strict {
        separators.extend([",", " + ", "+", " & ", " with "]);
    }
    let in_inventory = |name: &str| inventory.iter().find(|n| **n == name).cloned();
    let lower = body.to_ascii_lowercase();
    let mut found: Option<(String, String)> = None;
    for sep in separators {
        for (at, _) in lower.match_indices(sep) {
            let (Some(l), Some(r)) = (
                unquote(&body[..at], strict),
                unquote(&body[at + sep.len()..], strict),
            ) else {
                continue;
            };
            let (Some(a), Some(b)) = (
                in_inventory(&normalize_name(l)),
                in_inventory(&normalize_name(r)),
            ) else {
                continue;
            };
            let pair = if a <= b { (a, b) } else { (b, a) };
            match &found {
                Some(prev) if *prev != pair => return None,
                _ => found = Some(pair),
            }
        }
    }
    let (first, second) = found?;
    let reasoning = lines[idx + 1..].iter().enumerate().find_map(|(k, l)| {
        labelled(l, "reasoning").map(|first_line| {
            let mut text = first_line.to_string();
            for more in &lines[idx + 2 + k..] {
                text.push('\n');
                text.push_str(more);
            }
            text.trim().to_string()
        })
    });
    Some(ParsedOutput {
        first,
        second,
        reasoning: reasoning.filter(|r| !r.is_empty()),
    })
}
