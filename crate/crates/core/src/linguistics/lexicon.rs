use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::WordProperties;

/// Bundled word records keyed by lowercased word.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: BTreeMap<String, WordProperties>,
}

impl Lexicon {
    /// Parses one JSON record per line; blank lines are skipped.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: WordProperties =
                crate::codec::from_json_str(line).map_err(|e| Error::Corpus {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            record.validate()?;
            let key = record.word.to_lowercase();
            if entries.insert(key.clone(), record).is_some() {
                return Err(Error::Corpus {
                    line: i + 1,
                    message: format!("duplicate entry {key:?}"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, word: &str) -> Option<&WordProperties> {
        self.entries.get(&word.to_lowercase())
    }

    pub fn lookup(&self, word: &str) -> Result<&WordProperties> {
        self.get(word).ok_or_else(|| Error::UnknownWord(word.to_string()))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(&word.to_lowercase())
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = &WordProperties> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
