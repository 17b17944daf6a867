//! Record/replay of provider exchanges as JSONL, one exchange per line:
//! `{"key": ..., "request": ..., "response": ..., "task": ...}`.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Provider, ProviderHandle, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CassetteMode {
    Record,
    Replay,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Exchange {
    task: Task,
    key: String,
    request: serde_json::Value,
    response: serde_json::Value,
}

/// Stable key of a request: sha256 over its canonical encoding.
pub fn request_key(task: Task, request: &serde_json::Value) -> String {
    let mut h = Sha256::new();
    h.update(task.as_str().as_bytes());
    h.update([0]);
    h.update(crate::codec::canonical(request).as_bytes());
    hex::encode(&h.finalize()[..12])
}

enum Inner {
    Record { upstream: ProviderHandle, file: Mutex<File> },
    Replay { tape: HashMap<(Task, String), serde_json::Value> },
}

pub struct Cassette(Inner);

impl Cassette {
    /// Forwards to `upstream` and appends every exchange to `path` (truncated first).
    pub fn record(upstream: ProviderHandle, path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(Self(Inner::Record { upstream, file: Mutex::new(file) }))
    }

    pub fn replay(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut tape = HashMap::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let ex: Exchange = crate::codec::from_json_str(line).map_err(|e| Error::Corpus {
                line: i + 1,
                message: e.to_string(),
            })?;
            tape.insert((ex.task, ex.key), ex.response);
        }
        Ok(Self(Inner::Replay { tape }))
    }
}

impl Provider for Cassette {
    fn complete(&self, task: Task, request: &serde_json::Value) -> Result<serde_json::Value> {
        let key = request_key(task, request);
        match &self.0 {
            Inner::Replay { tape } => tape
                .get(&(task, key.clone()))
                .cloned()
                .ok_or(Error::CassetteMiss { task: task.to_string(), key }),
            Inner::Record { upstream, file } => {
                let response = upstream.complete(task, request)?;
                let line = crate::codec::canonical(&Exchange {
                    task,
                    key,
                    request: request.clone(),
                    response: response.clone(),
                });
                let mut f = file.lock().unwrap_or_else(|p| p.into_inner());
                writeln!(f, "{line}").map_err(|e| Error::io("cassette", e))?;
                Ok(response)
            }
        }
    }

    fn backend(&self) -> &'static str {
        match self.0 {
            Inner::Record { .. } => "cassette-record",
            Inner::Replay { .. } => "cassette-replay",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::Knowledge;

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tape.jsonl");
        let req = serde_json::json!({ "word": "reach", "context_sentence": "" });
        let rec = Cassette::record(ProviderHandle::offline(Knowledge::shared_arc()), &path).unwrap();
        let live = rec.complete(Task::PropertySynthesis, &req).unwrap();
        drop(rec);
        let rep = Cassette::replay(&path).unwrap();
        assert_eq!(rep.complete(Task::PropertySynthesis, &req).unwrap(), live);
        let other = serde_json::json!({ "word": "teach", "context_sentence": "" });
        assert!(matches!(
            rep.complete(Task::PropertySynthesis, &other),
            Err(Error::CassetteMiss { .. })
        ));
    }

    #[test]
    fn keys_ignore_field_order() {
        let a = serde_json::json!({ "a": 1, "b": 2 });
        let b: serde_json::Value = serde_json::from_str(r#"{"b":2,"a":1}"#).unwrap();
        assert_eq!(request_key(Task::SemanticCheck, &a), request_key(Task::SemanticCheck, &b));
        assert_ne!(request_key(Task::SemanticCheck, &a), request_key(Task::ErrorRanking, &a));
    }
}
