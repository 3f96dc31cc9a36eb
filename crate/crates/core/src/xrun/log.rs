use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RunConfig, RunError};
use crate::agents::RepromptReason;
use crate::collective::TopologySpec;

pub const LOG_FORMAT: &str = "craftsim-log/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub graph_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_hash: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeLabel {
    NewItem,
    DuplicateResult,
    Invalid,
    Repeated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitKind {
    Start,
    End,
}

/// One JSONL line. Item names, never ids, so logs survive re-indexing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Header(Header),
    TaskStart {
        trial: u32,
        task: u32,
        step: u32,
        task_id: String,
        initial: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
        horizon: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        depth: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        distractors: Option<u32>,
        agents: usize,
        topology: TopologySpec,
        copy: bool,
    },
    Reprompt {
        trial: u32,
        task: u32,
        agent: usize,
        step: u32,
        reason: RepromptReason,
        raw: String,
    },
    Decision {
        trial: u32,
        task: u32,
        agent: usize,
        step: u32,
        first: String,
        second: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reasoning: Option<String>,
        reprompts_used: u32,
        fallback_used: bool,
    },
    StepOutcome {
        trial: u32,
        task: u32,
        agent: usize,
        step: u32,
        outcome: OutcomeLabel,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        result: Option<String>,
    },
    Diffusion {
        trial: u32,
        task: u32,
        agent: usize,
        step: u32,
        item: String,
        source: usize,
    },
    Visit {
        trial: u32,
        task: u32,
        agent: usize,
        step: u32,
        event: VisitKind,
        home: usize,
        host: usize,
    },
    Abort {
        trial: u32,
        task: u32,
        agent: usize,
        step: u32,
        error: String,
    },
    EpisodeEnd {
        trial: u32,
        task: u32,
        agent: usize,
        step: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        success: Option<bool>,
        inventory: usize,
        repetitions: u32,
        aborted: bool,
    },
}

/// Append-only run log: a header followed by trial-major records.
#[derive(Clone, Debug, PartialEq)]
pub struct EventLog {
    pub header: Header,
    pub records: Vec<Record>,
}

impl EventLog {
    pub fn write_to(&self, mut out: impl Write) -> Result<(), RunError> {
        let mut line = serde_json::to_vec(&Record::Header(self.header.clone()))?;
        line.push(b'\n');
        out.write_all(&line)?;
        for r in &self.records {
            line.clear();
            serde_json::to_writer(&mut line, r)?;
            line.push(b'\n');
            out.write_all(&line)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        buf
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), RunError> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read_from(reader: impl BufRead) -> Result<Self, RunError> {
        let mut header = None;
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| RunError::Log {
                line: i + 1,
                message: e.to_string(),
            })?;
            match (rec, header.is_some()) {
                (Record::Header(h), false) => header = Some(h),
                (rec, true) if !matches!(rec, Record::Header(_)) => records.push(rec),
                (_, seen) => {
                    let message = if seen {
                        "second header"
                    } else {
                        "log must start with a header"
                    };
                    return Err(RunError::Log {
                        line: i + 1,
                        message: message.into(),
                    });
                }
            }
        }
        let header = header.ok_or(RunError::Log {
            line: 0,
            message: "empty log".into(),
        })?;
        if header.format != LOG_FORMAT {
            return Err(RunError::Log {
                line: 1,
                message: format!("unsupported format {}", header.format),
            });
        }
        Ok(EventLog { header, records })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, RunError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
