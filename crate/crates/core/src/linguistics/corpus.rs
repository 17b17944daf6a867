use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::normalize_phoneme;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusEntry {
    pub grapheme: String,
    pub example: String,
}

/// Attested spellings for each phoneme. Entries are ordered; the first
/// entry for a grapheme is its preferred example.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphemePhonemeCorpus {
    pub version: u32,
    pub entries: BTreeMap<String, Vec<CorpusEntry>>,
}

impl GraphemePhonemeCorpus {
    pub fn from_json(text: &str) -> Result<Self> {
        let corpus: Self = crate::codec::from_json_str(text)?;
        corpus.check()?;
        Ok(corpus)
    }

    fn check(&self) -> Result<()> {
        for (phoneme, list) in &self.entries {
            for e in list {
                if e.grapheme.is_empty() {
                    return Err(Error::Schema(format!("empty grapheme for {phoneme}")));
                }
                if !e.example.contains(&e.grapheme) {
                    return Err(Error::Schema(format!(
                        "example {:?} does not contain grapheme {:?}",
                        e.example, e.grapheme
                    )));
                }
            }
        }
        Ok(())
    }

    fn spellings(&self, phoneme: &str) -> &[CorpusEntry] {
        let key = normalize_phoneme(phoneme);
        self.entries
            .iter()
            .find(|(p, _)| normalize_phoneme(p) == key)
            .map(|(_, v)| v.as_slice())
            .unwrap_or(&[])
    }

    /// True when `grapheme` is an attested spelling of `phoneme`.
    pub fn attests(&self, phoneme: &str, grapheme: &str) -> bool {
        self.spellings(phoneme).iter().any(|e| e.grapheme == grapheme)
    }

    /// First phoneme (in key order) that lists `grapheme`.
    pub fn phoneme_for(&self, grapheme: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, list)| list.iter().any(|e| e.grapheme == grapheme))
            .map(|(p, _)| p.as_str())
    }

    /// Example words spelling `phoneme` with `grapheme`, preferred first.
    pub fn examples<'a>(&'a self, phoneme: &str, grapheme: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.spellings(phoneme)
            .iter()
            .filter(move |e| e.grapheme == grapheme)
            .map(|e| e.example.as_str())
    }

    /// Distinct graphemes attested for `phoneme`, in corpus order.
    pub fn graphemes_for(&self, phoneme: &str) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in self.spellings(phoneme) {
            if !out.contains(&e.grapheme.as_str()) {
                out.push(&e.grapheme);
            }
        }
        out
    }

    pub fn contains_example(&self, word: &str) -> bool {
        self.entries.values().flatten().any(|e| e.example == word)
    }
}
