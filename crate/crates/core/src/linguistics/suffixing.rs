use regex::Regex;
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[allow(dead_code)]
    version: u32,
    rules: Vec<RuleDef>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDef {
    name: String,
    base_pattern: String,
    suffix_pattern: String,
    description: String,
}

/// A spelling change made when a suffix joins a base.
#[derive(Debug, Clone)]
pub struct SuffixRule {
    pub name: String,
    pub description: String,
    base: Regex,
    suffix: Regex,
}

impl SuffixRule {
    pub fn applies(&self, base: &str, suffix: &str) -> bool {
        self.base.is_match(base) && self.suffix.is_match(suffix)
    }
}

#[derive(Debug, Clone)]
pub struct SuffixRules {
    rules: Vec<SuffixRule>,
}

impl SuffixRules {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: RuleFile = crate::codec::from_json_str(text)?;
        let compile = |p: &str| Regex::new(p).map_err(|e| Error::Schema(format!("bad pattern {p:?}: {e}")));
        let rules = file
            .rules
            .into_iter()
            .map(|r| {
                Ok(SuffixRule {
                    base: compile(&r.base_pattern)?,
                    suffix: compile(&r.suffix_pattern)?,
                    name: r.name,
                    description: r.description,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rules })
    }

    /// First rule that changes the spelling of `base` before `suffix`
    /// (both without connector hyphens).
    pub fn rule_for(&self, base: &str, suffix: &str) -> Option<&SuffixRule> {
        self.rules.iter().find(|r| r.applies(base, suffix))
    }

    pub fn rules(&self) -> &[SuffixRule] {
        &self.rules
    }
}
