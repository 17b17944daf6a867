//! Diagnostic features of an attempt/target pair and the ranked error
//! categories derived from them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::detection::AttemptContext;
use crate::error::{Error, Result};
use crate::hypothesis::LearningEffect;
use crate::knowledge::Knowledge;
use crate::linguistics::align::{diff_graphemes, edit_script, Costs, EditOp};
use crate::linguistics::attempt::{base_morpheme_indices, spans, LetterAlignment};
use crate::linguistics::{sounded, strip_connector, WordProperties};
use crate::providers::{ProviderHandle, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticFeatures {
    pub prefix_error: bool,
    pub suffix_error: bool,
    pub segmentation_error: bool,
    pub suffixing_change_applies: bool,
    pub phoneme_match: f64,
    pub grapheme_mismatch_count: u32,
    pub morpheme_boundaries_preserved: bool,
    pub homophone_confusion: bool,
    pub visual_similarity_only: bool,
    /// Some edit falls inside a base morpheme.
    pub base_error: bool,
}

impl DiagnosticFeatures {
    /// Features of a word compared with itself.
    pub fn no_error() -> Self {
        Self {
            prefix_error: false,
            suffix_error: false,
            segmentation_error: false,
            suffixing_change_applies: false,
            phoneme_match: 1.0,
            grapheme_mismatch_count: 0,
            morpheme_boundaries_preserved: true,
            homophone_confusion: false,
            visual_similarity_only: false,
            base_error: false,
        }
    }

    pub fn has_error(&self) -> bool {
        self.segmentation_error || self.grapheme_mismatch_count > 0
    }

    pub fn phoneme_distance(&self) -> f64 {
        1.0 - self.phoneme_match
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    GpcMismatch,
    MorphologicalConfusion,
    SuffixingConvention,
    Segmentation,
    Homophone,
    SemanticMismatch,
    VisualConfusion,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::GpcMismatch,
        Category::MorphologicalConfusion,
        Category::SuffixingConvention,
        Category::Segmentation,
        Category::Homophone,
        Category::SemanticMismatch,
        Category::VisualConfusion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::GpcMismatch => "gpc_mismatch",
            Category::MorphologicalConfusion => "morphological_confusion",
            Category::SuffixingConvention => "suffixing_convention",
            Category::Segmentation => "segmentation",
            Category::Homophone => "homophone",
            Category::SemanticMismatch => "semantic_mismatch",
            Category::VisualConfusion => "visual_confusion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankedCategory {
    pub category: Category,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorDiagnosis {
    pub features: DiagnosticFeatures,
    pub ranked_categories: Vec<RankedCategory>,
}

impl ErrorDiagnosis {
    pub fn top(&self) -> Option<Category> {
        self.ranked_categories.first().map(|r| r.category)
    }

    /// Every category sharing the highest confidence.
    pub fn rank_one(&self) -> Vec<Category> {
        let Some(best) = self.ranked_categories.first() else {
            return Vec::new();
        };
        self.ranked_categories
            .iter()
            .take_while(|r| r.confidence == best.confidence)
            .map(|r| r.category)
            .collect()
    }

    pub fn confidence(&self, category: Category) -> f64 {
        self.ranked_categories
            .iter()
            .find(|r| r.category == category)
            .map_or(0.0, |r| r.confidence)
    }
}

/// Checks ranking invariants: confidences in [0,1], non-increasing, unique.
pub fn ranking_problems(ranked: &[RankedCategory]) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, r) in ranked.iter().enumerate() {
        if !(0.0..=1.0).contains(&r.confidence) {
            out.push(format!("confidence {} out of range", r.confidence));
        }
        if i > 0 && r.confidence > ranked[i - 1].confidence {
            out.push(format!("confidence increases at rank {}", i + 1));
        }
        if !seen.insert(r.category) {
            out.push(format!("{} listed twice", r.category.as_str()));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyFile {
    version: u32,
    categories: Vec<CategoryDef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryDef {
    pub name: Category,
    pub descriptor: String,
    pub resolved_by: Vec<LearningEffect>,
}

/// Error categories and the learning effects that resolve each.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    categories: Vec<CategoryDef>,
}

impl Taxonomy {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: TaxonomyFile = crate::codec::from_json_str(text)?;
        let names: BTreeSet<_> = file.categories.iter().map(|c| c.name).collect();
        if names.len() != file.categories.len() || names.len() != Category::ALL.len() {
            return Err(Error::Schema("taxonomy must list each category exactly once".into()));
        }
        let mut owners = BTreeSet::new();
        for c in &file.categories {
            for e in &c.resolved_by {
                if !owners.insert(*e) {
                    return Err(Error::Schema(format!("effect {} resolves two categories", e.as_str())));
                }
            }
        }
        Ok(Self { categories: file.categories })
    }

    pub fn categories(&self) -> impl Iterator<Item = &CategoryDef> {
        self.categories.iter()
    }

    pub fn category_of(&self, effect: LearningEffect) -> Option<Category> {
        self.categories
            .iter()
            .find(|c| c.resolved_by.contains(&effect))
            .map(|c| c.name)
    }

    pub fn resolves(&self, effect: LearningEffect, category: Category) -> bool {
        self.category_of(effect) == Some(category)
    }

    pub fn descriptor(&self, category: Category) -> &str {
        self.categories
            .iter()
            .find(|c| c.name == category)
            .map_or("", |c| c.descriptor.as_str())
    }
}

/// Letter pairs that are easy to confuse by shape.
const CONFUSABLE: &[(char, char)] = &[
    ('b', 'd'),
    ('p', 'q'),
    ('b', 'p'),
    ('d', 'q'),
    ('m', 'n'),
    ('n', 'u'),
    ('u', 'v'),
    ('v', 'w'),
    ('i', 'l'),
    ('i', 'j'),
    ('h', 'n'),
    ('f', 't'),
];

fn confusable(a: char, b: char) -> bool {
    CONFUSABLE.iter().any(|&(x, y)| (x, y) == (a, b) || (y, x) == (a, b))
}

fn boundaries(word: &str) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let mut k = 0;
    for c in word.trim().chars() {
        if c.is_whitespace() {
            out.insert(k);
        } else {
            k += 1;
        }
    }
    out
}

/// Levenshtein similarity of the sounded phonemes, in [0, 1].
pub fn phoneme_match(attempt: &WordProperties, target: &WordProperties) -> f64 {
    let a = sounded(&attempt.phonemes);
    let t = sounded(&target.phonemes);
    let longest = a.len().max(t.len());
    if longest == 0 {
        return 1.0;
    }
    let (d, _) = edit_script(&a, &t, Costs::UNIT);
    1.0 - d as f64 / longest as f64
}

pub fn grapheme_mismatch_count(attempt: &WordProperties, target: &WordProperties) -> u32 {
    let lower = |v: &[String]| v.iter().map(|g| g.to_lowercase()).collect::<Vec<_>>();
    diff_graphemes(&lower(&attempt.graphemes), &lower(&target.graphemes)).0
}

/// Edit positions in target letter coordinates. An extra attempt letter is
/// positioned before the next target letter.
fn edit_positions(la: &LetterAlignment) -> Vec<(EditOp, usize)> {
    let mut out = Vec::new();
    let mut next = 0;
    for s in &la.steps {
        match s.op {
            EditOp::Match => next = s.to.unwrap() + 1,
            EditOp::Substitute | EditOp::Insert => {
                out.push((s.op, s.to.unwrap()));
                next = s.to.unwrap() + 1;
            }
            EditOp::Delete => out.push((s.op, next)),
        }
    }
    out
}

fn affix_error(
    projected: &str,
    expected: &str,
    known: impl Fn(&str) -> bool,
) -> bool {
    if projected.is_empty() {
        return true;
    }
    if projected == expected {
        return false;
    }
    known(projected) || !projected.chars().any(|c| expected.contains(c))
}

/// Symbolic features; no provider involved.
pub fn compute_features(
    attempt: &WordProperties,
    target: &WordProperties,
    knowledge: &Knowledge,
) -> DiagnosticFeatures {
    let la = LetterAlignment::new(&attempt.word, &target.word);
    let edits = edit_positions(&la);

    let target_bounds = boundaries(&target.word);
    let attempt_bounds: BTreeSet<usize> = boundaries(&attempt.word)
        .into_iter()
        .map(|k| la.owner.get(k).copied().unwrap_or(la.target.len()))
        .collect();
    let segmentation_error = target_bounds != attempt_bounds;

    let m_spans = spans(target.morphemes.iter().map(String::as_str));
    let mut prefix_error = false;
    let mut suffix_error = false;
    let mut lost_morpheme = false;
    for (m, &(s, e)) in target.morphemes.iter().zip(&m_spans) {
        let projected = la.project(s, e);
        lost_morpheme |= projected.is_empty();
        let bare = strip_connector(m).to_lowercase();
        if m.ends_with('-') {
            prefix_error |= affix_error(&projected, &bare, |x| knowledge.affixes.is_prefix(x));
        } else if m.starts_with('-') {
            suffix_error |= affix_error(&projected, &bare, |x| knowledge.affixes.is_suffix(x));
        }
    }
    let interior: BTreeSet<usize> = m_spans.iter().skip(1).map(|s| s.0).collect();
    let extra_at_boundary = edits
        .iter()
        .any(|&(op, at)| op == EditOp::Delete && interior.contains(&at));
    let morpheme_boundaries_preserved = !lost_morpheme && !extra_at_boundary;

    let suffixing_change_applies = suffixing_applies(target, &m_spans, &edits, knowledge);

    let base_spans: Vec<(usize, usize)> = base_morpheme_indices(target)
        .into_iter()
        .map(|i| m_spans[i])
        .collect();
    let base_error = edits.iter().any(|&(op, at)| {
        base_spans.iter().any(|&(s, e)| match op {
            EditOp::Delete => s < at && at < e,
            _ => s <= at && at < e,
        })
    });

    let attempt_word = attempt.word.trim().to_lowercase();
    let target_word = target.word.trim().to_lowercase();
    let homophone_confusion = attempt_word != target_word
        && (target.homophones.iter().any(|h| h.to_lowercase() == attempt_word)
            || knowledge
                .lexicon
                .get(&attempt_word)
                .is_some_and(|a| a.homophones.iter().any(|h| h.to_lowercase() == target_word)));

    let subs: Vec<(char, char)> = la
        .steps
        .iter()
        .filter(|s| s.op != EditOp::Match)
        .map(|s| match (s.from, s.to) {
            (Some(i), Some(j)) => (la.attempt[i], la.target[j]),
            _ => (' ', ' '),
        })
        .collect();
    let visual_similarity_only =
        !subs.is_empty() && subs.iter().all(|&(a, b)| a != ' ' && confusable(a, b));

    DiagnosticFeatures {
        prefix_error,
        suffix_error,
        segmentation_error,
        suffixing_change_applies,
        phoneme_match: phoneme_match(attempt, target),
        grapheme_mismatch_count: grapheme_mismatch_count(attempt, target),
        morpheme_boundaries_preserved,
        homophone_confusion,
        visual_similarity_only,
        base_error,
    }
}

/// A suffixing rule fires for the target's stem and first suffix, and the
/// attempt differs near the join.
fn suffixing_applies(
    target: &WordProperties,
    m_spans: &[(usize, usize)],
    edits: &[(EditOp, usize)],
    knowledge: &Knowledge,
) -> bool {
    let Some(si) = target.morphemes.iter().position(|m| m.starts_with('-')) else {
        return false;
    };
    if si == 0 {
        return false;
    }
    let stem = target.morphemes[si - 1].to_lowercase();
    let suffix = strip_connector(&target.morphemes[si]).to_lowercase();
    let base = target
        .bases
        .iter()
        .map(|b| b.to_lowercase())
        .find(|b| {
            stem.contains(b.as_str())
                || b.strip_suffix('e').or_else(|| b.strip_suffix('y')).is_some_and(|s| stem.contains(s))
        })
        .unwrap_or_else(|| stem.clone());
    if knowledge.suffixing.rule_for(&base, &suffix).is_none() {
        return false;
    }
    let join = m_spans[si - 1].1;
    edits
        .iter()
        .any(|&(_, at)| at + 2 >= join && at < join + 1)
}

/// Confidence assigned to each rank by the offline table.
pub const RANK_CONFIDENCE: [f64; 4] = [0.9, 0.5, 0.25, 0.1];

/// Offline ranking: ordered rules, first occurrence of a category wins.
pub fn rank_offline(f: &DiagnosticFeatures, epsilon: f64) -> Vec<RankedCategory> {
    use Category::*;
    let near = f.phoneme_distance() <= epsilon + 1e-12;
    let rules: [(bool, Category); 9] = [
        (f.segmentation_error, Segmentation),
        (f.homophone_confusion, Homophone),
        (f.suffixing_change_applies, SuffixingConvention),
        (
            f.prefix_error || f.suffix_error || !f.morpheme_boundaries_preserved,
            MorphologicalConfusion,
        ),
        (f.visual_similarity_only, VisualConfusion),
        (f.grapheme_mismatch_count >= 1 && near, GpcMismatch),
        (f.grapheme_mismatch_count >= 1 && !near, VisualConfusion),
        (f.base_error, MorphologicalConfusion),
        (true, SemanticMismatch),
    ];
    let mut out: Vec<RankedCategory> = Vec::new();
    for (fires, category) in rules {
        if fires && !out.iter().any(|r| r.category == category) {
            let rank = out.len().min(RANK_CONFIDENCE.len() - 1);
            out.push(RankedCategory {
                category,
                confidence: RANK_CONFIDENCE[rank],
            });
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct RankingRequest {
    pub features: DiagnosticFeatures,
    pub attempt: String,
    pub target: String,
    pub sentence: String,
    pub epsilon: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RankingResponse {
    pub ranked_categories: Vec<RankedCategory>,
}

/// Features are always symbolic; the ranking comes from the provider.
pub fn diagnose(
    attempt: &WordProperties,
    target: &WordProperties,
    context: &AttemptContext,
    knowledge: &Knowledge,
    epsilon: f64,
    provider: &ProviderHandle,
) -> Result<ErrorDiagnosis> {
    let features = compute_features(attempt, target, knowledge);
    let resp: RankingResponse = provider.call(
        Task::ErrorRanking,
        &RankingRequest {
            features: features.clone(),
            attempt: context.attempt.clone(),
            target: context.target.clone(),
            sentence: context.sentence.clone(),
            epsilon,
        },
    )?;
    if let Some(p) = ranking_problems(&resp.ranked_categories).into_iter().next() {
        return Err(Error::SchemaViolation { task: Task::ErrorRanking.to_string(), path: "ranked_categories".into(), detail: p });
    }
    Ok(ErrorDiagnosis {
        features,
        ranked_categories: resp.ranked_categories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linguistics::analyze_attempt;

    fn features(a: &str, t: &str) -> DiagnosticFeatures {
        let k = Knowledge::shared();
        let target = k.lexicon.lookup(t).unwrap();
        let attempt = analyze_attempt(a, target, &k.corpus, "");
        compute_features(&attempt, target, k)
    }

    #[test]
    fn reech() {
        let f = features("reech", "reach");
        assert_eq!(f.grapheme_mismatch_count, 1);
        assert!((f.phoneme_match - 1.0).abs() < 1e-9);
        assert!(!f.prefix_error && !f.suffix_error && !f.segmentation_error);
        assert!(!f.suffixing_change_applies);
        assert!(f.morpheme_boundaries_preserved);
        assert_eq!(rank_offline(&f, 0.15)[0].category, Category::GpcMismatch);
    }

    #[test]
    fn runing() {
        let f = features("runing", "running");
        assert!(f.suffixing_change_applies);
        assert_eq!(rank_offline(&f, 0.15)[0].category, Category::SuffixingConvention);
    }

    #[test]
    fn alot() {
        let f = features("alot", "a lot");
        assert!(f.segmentation_error);
        assert_eq!(f.grapheme_mismatch_count, 0);
        assert_eq!(rank_offline(&f, 0.15)[0].category, Category::Segmentation);
    }

    #[test]
    fn constractd() {
        let f = features("constractd", "constructed");
        assert_eq!(f.grapheme_mismatch_count, 2);
        assert!(f.phoneme_distance() <= 0.15);
        assert!(f.base_error && f.morpheme_boundaries_preserved);
        assert!(!f.suffix_error && !f.prefix_error);
    }

    #[test]
    fn affix_and_boundary_errors() {
        assert!(features("inhappy", "unhappy").prefix_error);
        assert!(features("jumpt", "jumped").suffix_error);
        assert!(!features("dissapear", "disappear").morpheme_boundaries_preserved);
        assert!(features("makeing", "making").suffixing_change_applies);
        assert!(features("cryed", "cried").suffixing_change_applies);
        assert!(!features("beutiful", "beautiful").suffixing_change_applies);
    }

    #[test]
    fn visual_and_homophone() {
        assert!(features("bog", "dog").visual_similarity_only);
        assert!(!features("reech", "reach").visual_similarity_only);
        assert!(features("new", "knew").homophone_confusion);
        assert!(features("rite", "right").homophone_confusion);
    }

    #[test]
    fn identical_words_have_no_error_flags() {
        let k = Knowledge::shared();
        for t in k.lexicon.entries() {
            let f = compute_features(t, t, k);
            assert_eq!(f, DiagnosticFeatures::no_error(), "{}", t.word);
        }
    }

    #[test]
    fn decision_table_is_total() {
        let gmcs = [0u32, 1, 2, 5];
        let matches = [0.0, 0.5, 0.86, 1.0];
        for bits in 0u32..(1 << 8) {
            for &g in &gmcs {
                for &m in &matches {
                    let b = |k: u32| bits & (1 << k) != 0;
                    let f = DiagnosticFeatures {
                        prefix_error: b(0),
                        suffix_error: b(1),
                        segmentation_error: b(2),
                        suffixing_change_applies: b(3),
                        morpheme_boundaries_preserved: b(4),
                        homophone_confusion: b(5),
                        visual_similarity_only: b(6),
                        base_error: b(7),
                        phoneme_match: m,
                        grapheme_mismatch_count: g,
                    };
                    let r = rank_offline(&f, 0.15);
                    assert!(!r.is_empty());
                    assert!(ranking_problems(&r).is_empty());
                }
            }
        }
    }
}
