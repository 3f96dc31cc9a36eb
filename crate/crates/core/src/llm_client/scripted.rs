use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatClient, ChatRequest, ChatResponse, ClientError, Usage};

/// One recorded completion. Serialized as one JSONL line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub fingerprint: String,
    pub response: String,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl TranscriptEntry {
    pub fn from_exchange(req: &ChatRequest, resp: &ChatResponse) -> Self {
        TranscriptEntry {
            fingerprint: req.fingerprint(),
            response: resp.content.clone(),
            meta: serde_json::json!({
                "message_hashes": req.message_hashes(),
                "model": req.model,
                "usage": resp.usage,
            }),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, ClientError> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, ClientError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(&line).map_err(|e| ClientError::TranscriptFormat {
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        Ok(Transcript { entries })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ClientError> {
        let mut out = BufWriter::new(File::create(path)?);
        for e in &self.entries {
            serde_json::to_writer(&mut out, e).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Replays a transcript strictly in order; any fingerprint mismatch is an error.
pub struct ScriptedClient {
    transcript: Transcript,
    cursor: Mutex<usize>,
}

impl ScriptedClient {
    pub fn new(transcript: Transcript) -> Self {
        ScriptedClient {
            transcript,
            cursor: Mutex::new(0),
        }
    }

    /// Convenience for tests: canned replies that must match `requests`.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a ChatRequest, &'a str)>) -> Self {
        let entries = pairs
            .into_iter()
            .map(|(req, text)| {
                TranscriptEntry::from_exchange(
                    req,
                    &ChatResponse {
                        content: text.to_string(),
                        usage: None,
                        latency: Duration::ZERO,
                    },
                )
            })
            .collect();
        Self::new(Transcript { entries })
    }

    pub fn consumed(&self) -> usize {
        *self.cursor.lock().expect("cursor lock")
    }

    pub fn remaining(&self) -> usize {
        self.transcript.entries.len() - self.consumed()
    }

    fn divergence(entry: &TranscriptEntry, req: &ChatRequest) -> Option<String> {
        let expected: Vec<String> =
            serde_json::from_value(entry.meta.get("message_hashes")?.clone()).ok()?;
        let actual = req.message_hashes();
        let first =
            (0..expected.len().max(actual.len())).find(|&i| expected.get(i) != actual.get(i))?;
        let detail = match req.messages.get(first) {
            Some(m) => {
                let snippet: String = m.content.chars().take(60).collect();
                format!(
                    "first divergent message #{first} ({}): {snippet:?}",
                    m.role.as_str()
                )
            }
            None => format!(
                "request has {} messages, transcript expected {}",
                actual.len(),
                expected.len()
            ),
        };
        Some(detail)
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ClientError> {
        let mut cursor = self.cursor.lock().expect("cursor lock");
        let Some(entry) = self.transcript.entries.get(*cursor) else {
            return Err(ClientError::TranscriptExhausted { calls: *cursor });
        };
        let actual = req.fingerprint();
        if entry.fingerprint != actual {
            return Err(ClientError::TranscriptMismatch {
                call: *cursor,
                expected: entry.fingerprint.clone(),
                actual,
                divergence: Self::divergence(entry, req),
            });
        }
        *cursor += 1;
        let usage = entry
            .meta
            .get("usage")
            .and_then(|u| serde_json::from_value::<Usage>(u.clone()).ok());
        Ok(ChatResponse {
            content: entry.response.clone(),
            usage,
            latency: Duration::ZERO,
        })
    }
}

/// Wraps a client and appends every exchange to a JSONL sink.
pub struct RecordingClient<C> {
    inner: C,
    sink: Mutex<Box<dyn Write + Send>>,
}

impl<C: ChatClient> RecordingClient<C> {
    pub fn new(inner: C, sink: Box<dyn Write + Send>) -> Self {
        RecordingClient {
            inner,
            sink: Mutex::new(sink),
        }
    }
}

impl<C: ChatClient> ChatClient for RecordingClient<C> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ClientError> {
        let resp = self.inner.complete(req)?;
        let line = serde_json::to_string(&TranscriptEntry::from_exchange(req, &resp))
            .map_err(std::io::Error::from)?;
        let mut sink = self.sink.lock().expect("sink lock");
        sink.write_all(line.as_bytes())?;
        sink.write_all(b"\n")?;
        sink.flush()?;
        Ok(resp)
    }
}

/// Records `live` into a new transcript file at `path`.
pub fn record_transcript<C: ChatClient>(
    live: C,
    path: impl AsRef<Path>,
) -> Result<RecordingClient<C>, ClientError> {
    if let Some(dir) = path.as_ref().parent() {
        std::fs::create_dir_all(dir)?;
    }
    let file = File::create(path)?;
    Ok(RecordingClient::new(live, Box::new(BufWriter::new(file))))
}

pub fn replay_transcript(path: impl AsRef<Path>) -> Result<ScriptedClient, ClientError> {
    Ok(ScriptedClient::new(Transcript::read(path)?))
}
