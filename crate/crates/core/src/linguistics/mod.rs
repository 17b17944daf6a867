//! Word-level language knowledge: the property record, the bundled lexicon
//! and grapheme-phoneme corpus, alignment, and attempt analysis.

pub mod affix;
pub mod align;
pub mod attempt;
pub mod corpus;
pub mod lexicon;
pub mod suffixing;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::{ProviderHandle, Task};

pub use affix::AffixInventory;
pub use align::{align, diff_graphemes, edit_script, Alignment, Costs, EditOp, EditStep};
pub use attempt::analyze_attempt;
pub use corpus::{CorpusEntry, GraphemePhonemeCorpus};
pub use lexicon::Lexicon;
pub use suffixing::{SuffixRule, SuffixRules};

/// Marker paired with a grapheme that is not pronounced.
pub const SILENT: &str = "∅";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TriState {
    Yes,
    No,
    #[default]
    Unknown,
}

impl TriState {
    pub fn as_str(self) -> &'static str {
        match self {
            TriState::Yes => "yes",
            TriState::No => "no",
            TriState::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtymologyNote {
    pub origin_language: String,
    pub root: String,
    pub gloss: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordProperties {
    pub word: String,
    pub morphemes: Vec<String>,
    pub bases: Vec<String>,
    pub prefixes: Vec<String>,
    pub suffixes: Vec<String>,
    pub graphemes: Vec<String>,
    pub phonemes: Vec<String>,
    pub related_words: Vec<String>,
    pub etymology: Option<EtymologyNote>,
    pub homophones: Vec<String>,
    pub semantic_appropriateness: bool,
    pub syntactic_correctness: bool,
    pub meaning_understood: TriState,
    pub context_sentence: String,
}

/// Lowercased word with spaces removed; the letters that graphemes and
/// morphemes must spell.
pub fn letters(word: &str) -> String {
    word.chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Strips connector hyphens from an affix morpheme (`con-` -> `con`).
pub fn strip_connector(morpheme: &str) -> &str {
    morpheme.trim_start_matches('-').trim_end_matches('-')
}

/// Phoneme comparison form: slashes removed, length marks kept.
pub fn normalize_phoneme(p: &str) -> &str {
    p.trim_matches('/')
}

pub fn is_silent(p: &str) -> bool {
    normalize_phoneme(p) == SILENT
}

/// Sounded phonemes in comparison form.
pub fn sounded(phonemes: &[String]) -> Vec<&str> {
    phonemes
        .iter()
        .map(|p| normalize_phoneme(p))
        .filter(|p| *p != SILENT)
        .collect()
}

impl WordProperties {
    /// Morphemes without connector hyphens.
    pub fn bare_morphemes(&self) -> impl Iterator<Item = &str> {
        self.morphemes.iter().map(|m| strip_connector(m))
    }

    pub fn is_affix(morpheme: &str) -> bool {
        morpheme.starts_with('-') || morpheme.ends_with('-')
    }

    pub fn affix_count(&self) -> usize {
        self.prefixes.len() + self.suffixes.len()
    }

    pub fn has_silent_letter(&self) -> bool {
        self.phonemes.iter().any(|p| is_silent(p))
    }

    /// Related words that carry one of the bases, allowing for a dropped
    /// final `e` or `y` in the relative.
    pub fn family(&self) -> Vec<&str> {
        let stems: Vec<String> = self
            .bases
            .iter()
            .flat_map(|b| {
                let b = b.to_lowercase();
                let mut v = vec![b.clone()];
                if b.len() > 2 && (b.ends_with('e') || b.ends_with('y')) {
                    v.push(b[..b.len() - 1].to_string());
                }
                v
            })
            .collect();
        self.related_words
            .iter()
            .filter(|w| {
                let w = w.to_lowercase();
                stems.iter().any(|s| w.contains(s.as_str()))
            })
            .map(String::as_str)
            .collect()
    }

    /// Every invariant violation, empty when the record is valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let word = letters(&self.word);
        if word.is_empty() {
            out.push("word is empty".into());
        }
        let joined: String = self.bare_morphemes().collect::<String>().to_lowercase();
        if joined != word {
            out.push(format!("morphemes spell {joined:?}, expected {word:?}"));
        }
        let spelled: String = self.graphemes.concat().to_lowercase();
        if spelled != word {
            out.push(format!("graphemes spell {spelled:?}, expected {word:?}"));
        }
        if self.graphemes.iter().any(String::is_empty) {
            out.push("empty grapheme".into());
        }
        if self.graphemes.len() != self.phonemes.len() {
            out.push(format!(
                "{} graphemes but {} phonemes",
                self.graphemes.len(),
                self.phonemes.len()
            ));
        }
        for base in &self.bases {
            if !self.bare_morphemes().any(|m| contains_modulo_suffixing(m, base)) {
                out.push(format!("base {base:?} is not inside any morpheme"));
            }
        }
        for (list, kind) in [(&self.prefixes, "prefix"), (&self.suffixes, "suffix")] {
            for affix in list {
                if !self.morphemes.contains(affix) {
                    out.push(format!("{kind} {affix:?} is not a morpheme"));
                }
            }
        }
        if let Some(e) = &self.etymology {
            if e.root.trim().is_empty() {
                out.push("etymology root is empty".into());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvariantViolation {
                word: self.word.clone(),
                problems,
            })
        }
    }
}

/// `base` occurs in `morpheme`, or would after undoing a final-letter
/// suffixing change (dropped `e`, `y` changed to `i`).
fn contains_modulo_suffixing(morpheme: &str, base: &str) -> bool {
    if morpheme.contains(base) {
        return true;
    }
    let Some(stem) = base.strip_suffix('e').or_else(|| base.strip_suffix('y')) else {
        return false;
    };
    morpheme.contains(stem)
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct PropertyRequest {
    pub word: String,
    pub context_sentence: String,
    /// Analyse `word` as an attempt at this target rather than as a lexicon word.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<WordProperties>,
}

/// Properties of `word` as used in `context_sentence`.
pub fn synthesize_properties(
    word: &str,
    context_sentence: &str,
    provider: &ProviderHandle,
) -> Result<WordProperties> {
    check_word(word)?;
    provider.call(
        Task::PropertySynthesis,
        &PropertyRequest {
            word: word.to_string(),
            context_sentence: context_sentence.to_string(),
            reference: None,
        },
    )
}

/// Properties of a learner's attempt, analysed against the target record.
pub fn synthesize_attempt_properties(
    attempt: &str,
    context_sentence: &str,
    target: &WordProperties,
    provider: &ProviderHandle,
) -> Result<WordProperties> {
    check_word(attempt)?;
    provider.call(
        Task::PropertySynthesis,
        &PropertyRequest {
            word: attempt.to_string(),
            context_sentence: context_sentence.to_string(),
            reference: Some(target.clone()),
        },
    )
}

fn check_word(word: &str) -> Result<()> {
    let ok = !word.trim().is_empty()
        && word
            .chars()
            .all(|c| c.is_alphabetic() || c == '-' || c == '\'' || c == ' ');
    if ok {
        Ok(())
    } else {
        Err(Error::UnknownWord(word.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(word: &str, morphemes: &[&str], graphemes: &[&str], phonemes: &[&str]) -> WordProperties {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        WordProperties {
            word: word.into(),
            morphemes: s(morphemes),
            bases: vec![],
            prefixes: vec![],
            suffixes: vec![],
            graphemes: s(graphemes),
            phonemes: s(phonemes),
            related_words: vec![],
            etymology: None,
            homophones: vec![],
            semantic_appropriateness: true,
            syntactic_correctness: true,
            meaning_understood: TriState::Unknown,
            context_sentence: String::new(),
        }
    }

    #[test]
    fn valid_record_has_no_problems() {
        let mut r = record("sign", &["sign"], &["s", "i", "g", "n"], &["/s/", "/aɪ/", "∅", "/n/"]);
        r.bases = vec!["sign".into()];
        assert!(r.problems().is_empty());
        assert!(r.has_silent_letter());
    }

    #[test]
    fn detects_spelling_and_length_mismatch() {
        let r = record("sign", &["sin"], &["s", "i", "n"], &["/s/", "/aɪ/"]);
        let p = r.problems();
        assert_eq!(p.len(), 3, "{p:?}");
    }

    #[test]
    fn multiword_entries_ignore_spaces() {
        let r = record("a lot", &["a", "lot"], &["a", "l", "o", "t"], &["/ə/", "/l/", "/ɒ/", "/t/"]);
        assert!(r.problems().is_empty());
    }

    #[test]
    fn base_may_lose_final_e_or_y() {
        let mut r = record("making", &["mak", "-ing"], &["m", "a", "k", "i", "ng"], &["/m/", "/eɪ/", "/k/", "/ɪ/", "/ŋ/"]);
        r.bases = vec!["make".into()];
        r.suffixes = vec!["-ing".into()];
        assert!(r.problems().is_empty());
        r.bases = vec!["bake".into()];
        assert_eq!(r.problems().len(), 1);
    }

    #[test]
    fn rejects_non_words() {
        assert!(check_word("reach").is_ok());
        assert!(check_word("a lot").is_ok());
        assert!(check_word("don't").is_ok());
        assert!(check_word("").is_err());
        assert!(check_word("r3ach").is_err());
    }
}
