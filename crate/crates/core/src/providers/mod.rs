//! Uniform contract for generative calls, with an offline oracle backend and
//! a remote HTTP backend.

pub mod cassette;
pub mod offline;
pub mod remote;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::Knowledge;

pub use cassette::{Cassette, CassetteMode};
pub use offline::OfflineProvider;
pub use remote::{RemoteConfig, RemoteProvider, Transport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    PropertySynthesis,
    TargetPrediction,
    ErrorRanking,
    DescriptorScore,
    TraceGeneration,
    TraceSelection,
    ProgramSynthesis,
    SemanticCheck,
}

impl Task {
    pub const ALL: [Task; 8] = [
        Task::PropertySynthesis,
        Task::TargetPrediction,
        Task::ErrorRanking,
        Task::DescriptorScore,
        Task::TraceGeneration,
        Task::TraceSelection,
        Task::ProgramSynthesis,
        Task::SemanticCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::PropertySynthesis => "property_synthesis",
            Task::TargetPrediction => "target_prediction",
            Task::ErrorRanking => "error_ranking",
            Task::DescriptorScore => "descriptor_score",
            Task::TraceGeneration => "trace_generation",
            Task::TraceSelection => "trace_selection",
            Task::ProgramSynthesis => "program_synthesis",
            Task::SemanticCheck => "semantic_check",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown task {s:?}")))
    }
}

/// A backend answering structured task requests with structured payloads.
pub trait Provider: Send + Sync {
    fn complete(&self, task: Task, request: &serde_json::Value) -> Result<serde_json::Value>;

    fn backend(&self) -> &'static str;
}

/// Cheap, shareable handle over a provider backend.
#[derive(Clone)]
pub struct ProviderHandle(Arc<dyn Provider>);

impl fmt::Debug for ProviderHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("ProviderHandle").field(&self.0.backend()).finish()
    }
}

impl ProviderHandle {
    pub fn new(provider: impl Provider + 'static) -> Self {
        Self(Arc::new(provider))
    }

    pub fn offline(knowledge: Arc<Knowledge>) -> Self {
        Self::new(OfflineProvider::new(knowledge))
    }

    pub fn backend(&self) -> &'static str {
        self.0.backend()
    }

    pub fn complete(&self, task: Task, request: &serde_json::Value) -> Result<serde_json::Value> {
        self.0.complete(task, request)
    }

    /// Sends a typed request and validates the response against the task's
    /// response type before handing it back.
    pub fn call<Req: Serialize, Resp: DeserializeOwned>(&self, task: Task, request: &Req) -> Result<Resp> {
        let payload = serde_json::to_value(request)
            .map_err(|e| Error::provider(task.as_str(), format!("request does not serialize: {e}")))?;
        let value = self.0.complete(task, &payload)?;
        serde_path_to_error::deserialize(value).map_err(|e| Error::SchemaViolation {
            task: task.to_string(),
            path: e.path().to_string(),
            detail: e.into_inner().to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Offline,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CassetteConfig {
    pub path: PathBuf,
    pub mode: CassetteMode,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub backend: Backend,
    pub remote: Option<RemoteConfig>,
    pub cassette: Option<CassetteConfig>,
}

impl ProviderConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.backend == Backend::Remote {
            match &self.remote {
                None => out.push("remote backend needs a [remote] section".into()),
                Some(r) => out.extend(r.problems()),
            }
        }
        out
    }

    pub fn build(&self, knowledge: Arc<Knowledge>) -> Result<ProviderHandle> {
        let problems = self.problems();
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        let inner = match self.backend {
            Backend::Offline => ProviderHandle::offline(knowledge),
            Backend::Remote => {
                let remote = self.remote.clone().expect("checked above");
                ProviderHandle::new(RemoteProvider::from_config(remote)?)
            }
        };
        match &self.cassette {
            None => Ok(inner),
            Some(c) => Ok(ProviderHandle::new(match c.mode {
                CassetteMode::Record => Cassette::record(inner, &c.path)?,
                CassetteMode::Replay => Cassette::replay(&c.path)?,
            })),
        }
    }
}
