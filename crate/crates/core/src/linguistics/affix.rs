use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Known prefixes and suffixes, stored without connector hyphens.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffixInventory {
    pub version: u32,
    pub prefixes: BTreeSet<String>,
    pub suffixes: BTreeSet<String>,
}

impl AffixInventory {
    pub fn from_json(text: &str) -> Result<Self> {
        let inv: Self = crate::codec::from_json_str(text)?;
        if inv.prefixes.iter().chain(&inv.suffixes).any(|a| a.is_empty() || a.contains('-')) {
            return Err(Error::Schema("affixes must be non-empty and written without hyphens".into()));
        }
        Ok(inv)
    }

    pub fn is_prefix(&self, s: &str) -> bool {
        self.prefixes.contains(s)
    }

    pub fn is_suffix(&self, s: &str) -> bool {
        self.suffixes.contains(s)
    }
}
