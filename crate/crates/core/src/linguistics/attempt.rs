//! Projection of a target word's analysis onto a learner's attempt.
//!
//! Letters of the attempt are aligned with letters of the target; every
//! attempt letter is then owned by one target letter (extra letters by the
//! preceding one), and the target's grapheme and morpheme segmentation is
//! carried across through that ownership.

use super::align::{edit_script, Costs, EditOp, EditStep};
use super::{
    is_silent, letters, strip_connector, GraphemePhonemeCorpus, TriState, WordProperties, SILENT,
};

#[derive(Debug, Clone)]
pub struct LetterAlignment {
    pub attempt: Vec<char>,
    pub target: Vec<char>,
    /// Script turning attempt letters into target letters.
    pub steps: Vec<EditStep>,
    /// Target letter index owning each attempt letter.
    pub owner: Vec<usize>,
}

impl LetterAlignment {
    pub fn new(attempt: &str, target: &str) -> Self {
        let a: Vec<char> = letters(attempt).chars().collect();
        let t: Vec<char> = letters(target).chars().collect();
        let (_, steps) = edit_script(&a, &t, Costs::LETTERS);
        let mut owner = vec![0usize; a.len()];
        let mut pending = Vec::new();
        let mut last: Option<usize> = None;
        for s in &steps {
            match s.op {
                EditOp::Match | EditOp::Substitute => {
                    let j = s.to.unwrap();
                    for i in pending.drain(..) {
                        owner[i] = j;
                    }
                    owner[s.from.unwrap()] = j;
                    last = Some(j);
                }
                EditOp::Delete => match last {
                    Some(j) => owner[s.from.unwrap()] = j,
                    None => pending.push(s.from.unwrap()),
                },
                EditOp::Insert => {
                    if last.is_none() {
                        let j = s.to.unwrap();
                        for i in pending.drain(..) {
                            owner[i] = j;
                        }
                    }
                    last = Some(s.to.unwrap());
                }
            }
        }
        let fallback = t.len().saturating_sub(1);
        for i in pending {
            owner[i] = fallback;
        }
        Self { attempt: a, target: t, steps, owner }
    }

    /// Attempt letters owned by target letters in `[start, end)`.
    pub fn project(&self, start: usize, end: usize) -> String {
        self.attempt
            .iter()
            .zip(&self.owner)
            .filter(|(_, o)| (start..end).contains(*o))
            .map(|(c, _)| *c)
            .collect()
    }

    /// Attempt letter range owned by target letters in `[start, end)`.
    pub fn project_range(&self, start: usize, end: usize) -> Option<(usize, usize)> {
        let idx: Vec<usize> = (0..self.attempt.len())
            .filter(|i| (start..end).contains(&self.owner[*i]))
            .collect();
        Some((*idx.first()?, *idx.last()? + 1))
    }

    pub fn is_identity(&self) -> bool {
        self.attempt == self.target
    }
}

/// Character spans of consecutive pieces, ignoring connector hyphens.
pub fn spans<'a>(pieces: impl IntoIterator<Item = &'a str>) -> Vec<(usize, usize)> {
    let mut at = 0;
    pieces
        .into_iter()
        .map(|p| {
            let n = strip_connector(p).chars().count();
            let s = (at, at + n);
            at += n;
            s
        })
        .collect()
}

/// Indices of target morphemes that carry a base.
pub fn base_morpheme_indices(target: &WordProperties) -> Vec<usize> {
    target
        .morphemes
        .iter()
        .enumerate()
        .filter(|(_, m)| !WordProperties::is_affix(m))
        .filter(|(_, m)| {
            target.bases.is_empty()
                || target.bases.iter().any(|b| {
                    let m = m.to_lowercase();
                    let b = b.to_lowercase();
                    m.contains(&b)
                        || b.strip_suffix('e')
                            .or_else(|| b.strip_suffix('y'))
                            .is_some_and(|s| m.contains(s))
                })
        })
        .map(|(i, _)| i)
        .collect()
}

fn fallback_phoneme(grapheme: &str, word_final: bool, corpus: &GraphemePhonemeCorpus) -> String {
    let chars: Vec<char> = grapheme.chars().collect();
    let sounded = chars.iter().enumerate().find(|(k, c)| {
        !(word_final && **c == 'e' && *k == chars.len() - 1)
    });
    match sounded {
        Some((_, c)) => {
            let l = c.to_string();
            corpus
                .phoneme_for(&l)
                .map(str::to_string)
                .unwrap_or_else(|| format!("/{l}/"))
        }
        None => SILENT.to_string(),
    }
}

/// Property record for `attempt`, derived from the target's analysis.
pub fn analyze_attempt(
    attempt: &str,
    target: &WordProperties,
    corpus: &GraphemePhonemeCorpus,
    context_sentence: &str,
) -> WordProperties {
    let la = LetterAlignment::new(attempt, &target.word);

    let g_spans = spans(target.graphemes.iter().map(String::as_str));
    let mut graphemes = Vec::new();
    let mut phonemes = Vec::new();
    let last_nonempty = g_spans
        .iter()
        .rposition(|&(s, e)| !la.project(s, e).is_empty());
    for (gi, &(s, e)) in g_spans.iter().enumerate() {
        let g = la.project(s, e);
        if g.is_empty() {
            continue;
        }
        let tg = &target.graphemes[gi];
        let tp = &target.phonemes[gi];
        let p = if &g == tg || (!is_silent(tp) && corpus.attests(tp, &g)) {
            tp.clone()
        } else if let Some(p) = corpus.phoneme_for(&g) {
            p.to_string()
        } else {
            fallback_phoneme(&g, Some(gi) == last_nonempty, corpus)
        };
        graphemes.push(g);
        phonemes.push(p);
    }

    let m_spans = spans(target.morphemes.iter().map(String::as_str));
    let base_idx = base_morpheme_indices(target);
    let mut morphemes = Vec::new();
    let mut bases = Vec::new();
    let mut prefixes = Vec::new();
    let mut suffixes = Vec::new();
    for (mi, &(s, e)) in m_spans.iter().enumerate() {
        let body = la.project(s, e);
        if body.is_empty() {
            continue;
        }
        let tm = &target.morphemes[mi];
        let m = if tm.ends_with('-') {
            let m = format!("{body}-");
            prefixes.push(m.clone());
            m
        } else if tm.starts_with('-') {
            let m = format!("-{body}");
            suffixes.push(m.clone());
            m
        } else {
            if base_idx.contains(&mi) {
                bases.push(body.clone());
            }
            body
        };
        morphemes.push(m);
    }

    let same = la.is_identity();
    WordProperties {
        word: attempt.trim().to_lowercase(),
        morphemes,
        bases,
        prefixes,
        suffixes,
        graphemes,
        phonemes,
        related_words: Vec::new(),
        etymology: None,
        homophones: Vec::new(),
        semantic_appropriateness: same && target.semantic_appropriateness,
        syntactic_correctness: same && target.syntactic_correctness,
        meaning_understood: TriState::Unknown,
        context_sentence: context_sentence.to_string(),
    }
}
