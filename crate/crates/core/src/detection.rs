//! Misspelling detection in running text and target prediction.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::Knowledge;
use crate::linguistics::align::{edit_script, Costs};
use crate::linguistics::letters;
use crate::providers::{ProviderHandle, Task};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttemptContext {
    pub attempt: String,
    pub target: String,
    pub sentence: String,
    pub document_excerpt: String,
    /// Character offsets of the attempt inside `document_excerpt`.
    pub span: (usize, usize),
    /// Set when the target could not be told apart from an alternate.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub uncertain: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternates: Vec<String>,
}

impl AttemptContext {
    /// Context whose excerpt is the sentence itself.
    pub fn new(attempt: &str, target: &str, sentence: &str) -> Self {
        let (excerpt, span) = match char_find(sentence, attempt) {
            Some(start) => (sentence.to_string(), (start, start + attempt.chars().count())),
            None => (attempt.to_string(), (0, attempt.chars().count())),
        };
        Self {
            attempt: attempt.to_string(),
            target: target.to_string(),
            sentence: sentence.to_string(),
            document_excerpt: excerpt,
            span,
            uncertain: false,
            alternates: Vec::new(),
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.attempt.trim().is_empty() {
            out.push("attempt is empty".into());
        }
        if self.target.trim().is_empty() {
            out.push("target is empty".into());
        }
        let (s, e) = self.span;
        let spanned: Option<String> = (s <= e && e <= self.document_excerpt.chars().count())
            .then(|| self.document_excerpt.chars().skip(s).take(e - s).collect());
        if spanned.as_deref() != Some(self.attempt.as_str()) {
            out.push(format!("span {s}..{e} does not select {:?} in the excerpt", self.attempt));
        }
        out
    }
}

fn char_find(hay: &str, needle: &str) -> Option<usize> {
    hay.find(needle).map(|b| hay[..b].chars().count())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Pause,
    ExplicitCheck,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionReport {
    pub contexts: Vec<AttemptContext>,
    pub trigger: Trigger,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Character offsets into the source text.
    pub start: usize,
    pub end: usize,
}

/// Word tokens: a letter followed by letters, apostrophes and hyphens.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut cur: Option<(usize, String)> = None;
    for (i, c) in text.chars().enumerate() {
        let word_char = c.is_alphabetic() || (cur.is_some() && (c == '\'' || c == '-'));
        match (&mut cur, word_char) {
            (Some((_, s)), true) => s.push(c),
            (None, true) => cur = Some((i, c.to_string())),
            (Some(_), false) => {
                let (start, s) = cur.take().unwrap();
                out.push(finish(start, s));
            }
            (None, false) => {}
        }
    }
    if let Some((start, s)) = cur {
        out.push(finish(start, s));
    }
    out
}

fn finish(start: usize, mut s: String) -> Token {
    while s.ends_with('\'') || s.ends_with('-') {
        s.pop();
    }
    let end = start + s.chars().count();
    Token { text: s, start, end }
}

/// Sentence (character range) containing the character at `at`.
pub(crate) fn sentence_around(text: &str, at: usize) -> String {
    let chars: Vec<char> = text.chars().collect();
    let is_end = |c: char| matches!(c, '.' | '!' | '?' | '\n');
    let mut s = at;
    while s > 0 && !is_end(chars[s - 1]) {
        s -= 1;
    }
    let mut e = at;
    while e < chars.len() && !is_end(chars[e]) {
        e += 1;
    }
    if e < chars.len() && chars[e] != '\n' {
        e += 1;
    }
    chars[s..e].iter().collect::<String>().trim().to_string()
}

/// Weights of the offline target score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionWeights {
    pub edit_distance: f64,
    pub shared_prefix: f64,
    pub context_overlap: f64,
    /// Candidates within this score margin of the best are reported as alternates.
    pub alternate_margin: f64,
}

impl Default for PredictionWeights {
    fn default() -> Self {
        Self {
            edit_distance: 1.0,
            shared_prefix: 0.25,
            context_overlap: 0.5,
            alternate_margin: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    /// `None` when the word is judged correct as written.
    pub target: Option<String>,
    pub alternates: Vec<String>,
    pub uncertain: bool,
}

fn words(sentence: &str) -> BTreeSet<String> {
    tokenize(sentence).into_iter().map(|t| t.text.to_lowercase()).collect()
}

fn overlap(sentence_words: &BTreeSet<String>, reference: &str, exclude: &BTreeSet<String>) -> usize {
    words(reference)
        .iter()
        .filter(|w| !exclude.contains(*w) && sentence_words.contains(*w))
        .count()
}

fn shared_prefix(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count()
}

/// Offline target prediction from edit distance, prefix and context overlap.
pub fn predict_target(
    attempt: &str,
    sentence: &str,
    knowledge: &Knowledge,
    weights: &PredictionWeights,
) -> Prediction {
    let lower = attempt.to_lowercase();
    let sentence_words = words(sentence);

    if let Some(entry) = knowledge.lexicon.get(&lower) {
        let mut exclude: BTreeSet<String> = entry.homophones.iter().map(|h| h.to_lowercase()).collect();
        exclude.insert(lower.clone());
        let own = overlap(&sentence_words, &entry.context_sentence, &exclude);
        let better: Vec<(usize, &str)> = entry
            .homophones
            .iter()
            .filter_map(|h| knowledge.lexicon.get(h))
            .map(|h| (overlap(&sentence_words, &h.context_sentence, &exclude), h.word.as_str()))
            .filter(|(o, _)| *o > own)
            .collect();
        let best = better.iter().map(|b| b.0).max();
        let Some(best) = best else {
            return Prediction { target: None, alternates: vec![], uncertain: false };
        };
        let mut top: Vec<&str> = better.iter().filter(|b| b.0 == best).map(|b| b.1).collect();
        top.sort_unstable();
        return Prediction {
            target: Some(top[0].to_string()),
            alternates: top[1..].iter().map(|s| s.to_string()).collect(),
            uncertain: top.len() > 1,
        };
    }

    let a: Vec<char> = letters(&lower).chars().collect();
    let exclude: BTreeSet<String> = [lower.clone()].into();
    let mut scored: Vec<(f64, &str)> = knowledge
        .lexicon
        .entries()
        .map(|e| {
            let w = letters(&e.word);
            let wc: Vec<char> = w.chars().collect();
            let dist = edit_script(&a, &wc, Costs::UNIT).0 as f64;
            let score = -weights.edit_distance * dist
                + weights.shared_prefix * shared_prefix(&lower, &w) as f64
                + weights.context_overlap * overlap(&sentence_words, &e.context_sentence, &exclude) as f64;
            (score, e.word.as_str())
        })
        .collect();
    scored.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(y.1)));
    let Some(&(best, word)) = scored.first() else {
        return Prediction { target: None, alternates: vec![], uncertain: true };
    };
    let alternates: Vec<String> = scored[1..]
        .iter()
        .take_while(|(s, _)| best - s <= weights.alternate_margin)
        .map(|(_, w)| w.to_string())
        .collect();
    Prediction {
        target: Some(word.to_string()),
        uncertain: scored.get(1).is_some_and(|(s, _)| *s == best),
        alternates,
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct PredictionRequest {
    pub attempt: String,
    pub sentence: String,
    pub document: String,
}

/// Finds misspelled or misused words and predicts their targets.
pub fn detect(document: &str, knowledge: &Knowledge, provider: &ProviderHandle) -> Result<DetectionReport> {
    detect_with(document, Trigger::ExplicitCheck, knowledge, provider)
}

pub fn detect_with(
    document: &str,
    trigger: Trigger,
    knowledge: &Knowledge,
    provider: &ProviderHandle,
) -> Result<DetectionReport> {
    if document.trim().is_empty() {
        return Err(Error::Config("document is empty".into()));
    }
    let mut contexts = Vec::new();
    for tok in tokenize(document) {
        let lower = tok.text.to_lowercase();
        let known = knowledge.lexicon.get(&lower);
        if known.is_some_and(|e| e.homophones.is_empty()) {
            continue;
        }
        let sentence = sentence_around(document, tok.start);
        let p: Prediction = provider.call(
            Task::TargetPrediction,
            &PredictionRequest {
                attempt: tok.text.clone(),
                sentence: sentence.clone(),
                document: document.to_string(),
            },
        )?;
        let Some(target) = p.target else { continue };
        if target.to_lowercase() == lower {
            continue;
        }
        if !knowledge.lexicon.contains(&target) {
            return Err(Error::provider(
                Task::TargetPrediction.as_str(),
                format!("predicted target {target:?} is not in the lexicon"),
            ));
        }
        if p.uncertain || !p.alternates.is_empty() {
            tracing::info!(attempt = %tok.text, %target, alternates = ?p.alternates, "ambiguous target");
        }
        contexts.push(AttemptContext {
            attempt: tok.text,
            target,
            sentence,
            document_excerpt: document.to_string(),
            span: (tok.start, tok.end),
            uncertain: p.uncertain,
            alternates: p.alternates,
        });
    }
    Ok(DetectionReport { contexts, trigger })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyKind {
    Insert,
    Delete,
    /// A detection pass ran at this time.
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEvent {
    pub at_ms: u64,
    pub kind: KeyKind,
}

pub const DEFAULT_PAUSE_MS: u64 = 2_000;

/// True once the writer has paused for `pause_ms` after adding text that no
/// detection pass has seen yet.
pub fn should_trigger(log: &[KeyEvent], now_ms: u64, pause_ms: u64) -> bool {
    let Some(last_key) = log.iter().rev().find(|e| e.kind != KeyKind::Check) else {
        return false;
    };
    let last_check = log.iter().rev().find(|e| e.kind == KeyKind::Check).map(|e| e.at_ms);
    let new_text = log
        .iter()
        .any(|e| e.kind == KeyKind::Insert && last_check.is_none_or(|c| e.at_ms > c));
    now_ms.saturating_sub(last_key.at_ms) >= pause_ms && new_text
}
