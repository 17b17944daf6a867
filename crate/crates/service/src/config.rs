//! Service configuration, read from a TOML file.

use std::net::SocketAddr;
use std::num::NonZeroUsize;
use std::path::Path;
use std::sync::Arc;

use inquiry_core::knowledge::KnowledgePaths;
use inquiry_core::planner::PlannerConfig;
use inquiry_core::providers::ProviderConfig;
use inquiry_core::{Engine, Error, Knowledge, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    /// Largest accepted request body, in bytes.
    pub body_limit: usize,
    /// Sessions (and plans) kept before the least recently used is dropped.
    pub session_capacity: usize,
    pub data: KnowledgePaths,
    pub planner: PlannerConfig,
    pub provider: ProviderConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            body_limit: 64 * 1024,
            session_capacity: 1024,
            data: KnowledgePaths::default(),
            planner: PlannerConfig::default(),
            provider: ProviderConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self.bind.parse::<SocketAddr>() {
            Ok(a) if a.port() == 0 => out.push("bind port must be non-zero".into()),
            Ok(_) => {}
            Err(e) => out.push(format!("bind {:?}: {e}", self.bind)),
        }
        if self.body_limit == 0 {
            out.push("body_limit must be positive".into());
        }
        if self.session_capacity == 0 {
            out.push("session_capacity must be positive".into());
        }
        let d = &self.data;
        for (name, p) in [
            ("lexicon", &d.lexicon),
            ("corpus", &d.corpus),
            ("templates", &d.templates),
            ("affixes", &d.affixes),
            ("suffixing_rules", &d.suffixing_rules),
            ("taxonomy", &d.taxonomy),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    out.push(format!("data.{name} {} does not exist", p.display()));
                }
            }
        }
        out.extend(self.planner.problems());
        out.extend(self.provider.problems());
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p.join("; ")))
        }
    }

    pub fn capacity(&self) -> NonZeroUsize {
        NonZeroUsize::new(self.session_capacity).unwrap_or(NonZeroUsize::MIN)
    }

    pub fn engine(&self) -> Result<Engine> {
        self.validate()?;
        let knowledge = if self.data == KnowledgePaths::default() {
            Knowledge::shared_arc()
        } else {
            Arc::new(Knowledge::load(&self.data)?)
        };
        let provider = self.provider.build(knowledge.clone())?;
        Ok(Engine::new(knowledge, provider).with_config(self.planner.clone()))
    }
}
