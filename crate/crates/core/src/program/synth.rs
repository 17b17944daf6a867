//! Program synthesis from a selected trace, plus the validate-and-regenerate
//! loop.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    validate_program, Affordance, ChangeOp, ExecutionPlan, PlanMetadata, PlanNode, Reveal, RevealChange,
    BaseSpan, SemanticExpectation, Span, VerificationCondition, Violation, END_NODE,
};
use crate::analysis::ErrorDiagnosis;
use crate::detection::AttemptContext;
use crate::error::{Error, Result};
use crate::hypothesis::{ActionBase, HypothesisTemplate};
use crate::knowledge::Knowledge;
use crate::linguistics::attempt::{base_morpheme_indices, spans, LetterAlignment};
use crate::linguistics::{analyze_attempt, diff_graphemes, is_silent, strip_connector, EditOp, WordProperties};
use crate::planner::InquiryTrace;
use crate::providers::{ProviderHandle, Task};

pub const DEFAULT_MAX_RETRIES: usize = 3;

const ORIGINS: &[&str] = &["French", "Greek", "Latin", "Old English", "Old Norse"];
const NO_CHANGE: &str = "nothing changes";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct ProgramRequest {
    pub trace: InquiryTrace,
    pub props: WordProperties,
    pub attempt: String,
    pub sentence: String,
    pub diagnosis: ErrorDiagnosis,
    /// 1-based attempt number within the regenerate loop.
    pub attempt_number: usize,
    /// Problems found in the previous attempt, if any.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub previous_violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synthesized {
    pub plan: ExecutionPlan,
    /// Failed attempts before this plan validated.
    pub retry_count: usize,
}

fn request(
    trace: &InquiryTrace,
    props: &WordProperties,
    diagnosis: &ErrorDiagnosis,
    context: &AttemptContext,
    attempt_number: usize,
    previous_violations: Vec<Violation>,
) -> ProgramRequest {
    ProgramRequest {
        trace: trace.clone(),
        props: props.clone(),
        attempt: context.attempt.clone(),
        sentence: context.sentence.clone(),
        diagnosis: diagnosis.clone(),
        attempt_number,
        previous_violations,
    }
}

/// One synthesis call; the returned plan carries its content id but is not
/// yet validated.
pub fn synthesize_program(
    trace: &InquiryTrace,
    props: &WordProperties,
    diagnosis: &ErrorDiagnosis,
    context: &AttemptContext,
    provider: &ProviderHandle,
) -> Result<ExecutionPlan> {
    let plan: ExecutionPlan =
        provider.call(Task::ProgramSynthesis, &request(trace, props, diagnosis, context, 1, vec![]))?;
    Ok(plan.with_content_id())
}

/// Synthesizes until a plan validates, at most `max_retries` attempts.
pub fn regenerate_on_failure(
    trace: &InquiryTrace,
    props: &WordProperties,
    diagnosis: &ErrorDiagnosis,
    context: &AttemptContext,
    provider: &ProviderHandle,
    max_retries: usize,
) -> Result<Synthesized> {
    let budget = max_retries.max(1);
    let mut failures: Vec<Vec<Violation>> = Vec::new();
    for n in 1..=budget {
        let previous = failures.last().cloned().unwrap_or_default();
        let req = request(trace, props, diagnosis, context, n, previous);
        let violations = match provider.call::<_, ExecutionPlan>(Task::ProgramSynthesis, &req) {
            Ok(plan) => {
                let plan = plan.with_content_id();
                let v = validate_program(&plan);
                if v.is_empty() {
                    return Ok(Synthesized { plan, retry_count: n - 1 });
                }
                v
            }
            Err(Error::SchemaViolation { path, detail, .. }) => vec![Violation::Malformed(format!("{path}: {detail}"))],
            Err(e) => return Err(e),
        };
        tracing::warn!(attempt = n, ?violations, "synthesized plan rejected");
        failures.push(violations);
    }
    Err(Error::SynthesisFailure { attempts: failures })
}

struct Builder<'a> {
    k: &'a Knowledge,
    props: &'a WordProperties,
    attempt: &'a str,
    diagnosis: &'a ErrorDiagnosis,
    la: LetterAlignment,
    /// Char offset in the attempt of each attempt letter, plus its length.
    positions: Vec<usize>,
    changes: Vec<(RevealChange, Option<usize>)>,
}

fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn fill(text: &str, slots: &BTreeMap<&str, String>) -> String {
    let mut out = text.to_string();
    for (k, v) in slots {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    let mut chars = out.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => out,
    }
}

fn sorted_unique(items: impl IntoIterator<Item = String>) -> Vec<String> {
    items.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

fn rule_label(name: &str) -> String {
    match name {
        "doubling" => "double the final consonant".into(),
        "e_drop" => "drop the final e".into(),
        "y_to_i" => "change y to i".into(),
        other => other.replace('_', " "),
    }
}

impl<'a> Builder<'a> {
    fn new(k: &'a Knowledge, props: &'a WordProperties, attempt: &'a str, sentence: &str, diagnosis: &'a ErrorDiagnosis) -> Self {
        let la = LetterAlignment::new(attempt, &props.word);
        let mut positions: Vec<usize> = attempt
            .chars()
            .enumerate()
            .filter(|(_, c)| !c.is_whitespace())
            .map(|(i, _)| i)
            .collect();
        positions.push(attempt.chars().count());
        let attempt_props = analyze_attempt(attempt, props, &k.corpus, sentence);
        let ag = attempt_props.graphemes.clone();
        let starts = spans(ag.iter().map(String::as_str));
        let (_, steps) = diff_graphemes(&ag, &props.graphemes);
        let mut changes = Vec::new();
        let mut cursor = 0;
        for s in steps {
            let at_from = |i: usize| positions[starts[i].0];
            match s.op {
                EditOp::Match => cursor = starts[s.from.unwrap()].1,
                EditOp::Substitute => {
                    let (i, j) = (s.from.unwrap(), s.to.unwrap());
                    let c = RevealChange { op: ChangeOp::Substitute, at: at_from(i), from: ag[i].clone(), to: props.graphemes[j].clone() };
                    changes.push((c, Some(j)));
                    cursor = starts[i].1;
                }
                EditOp::Delete => {
                    let i = s.from.unwrap();
                    let c = RevealChange { op: ChangeOp::Delete, at: at_from(i), from: ag[i].clone(), to: String::new() };
                    changes.push((c, None));
                    cursor = starts[i].1;
                }
                EditOp::Insert => {
                    let j = s.to.unwrap();
                    let c = RevealChange { op: ChangeOp::Insert, at: positions[cursor], from: String::new(), to: props.graphemes[j].clone() };
                    changes.push((c, Some(j)));
                }
            }
        }
        Self { k, props, attempt, diagnosis, la, positions, changes }
    }

    fn target(&self) -> &str {
        &self.props.word
    }

    fn family(&self) -> Vec<String> {
        self.props.family().into_iter().map(str::to_string).collect()
    }

    fn base(&self) -> String {
        self.props
            .bases
            .first()
            .cloned()
            .unwrap_or_else(|| self.props.word.clone())
    }

    /// Word-sum pieces: affixes without connectors, bases in their plain form.
    fn sum_pieces(&self) -> Vec<String> {
        self.props
            .morphemes
            .iter()
            .map(|m| {
                if WordProperties::is_affix(m) {
                    return strip_connector(m).to_string();
                }
                self.props
                    .bases
                    .iter()
                    .find(|b| m.contains(b.as_str()))
                    .cloned()
                    .unwrap_or_else(|| m.clone())
            })
            .collect()
    }

    fn word_sum(&self) -> String {
        format!("{} → {}", self.sum_pieces().join(" + "), self.target())
    }

    fn affixes(&self) -> String {
        let all: Vec<String> = self.props.prefixes.iter().chain(&self.props.suffixes).cloned().collect();
        join_and(&all)
    }

    fn letter_span(&self, start: usize, end: usize) -> Span {
        Span { start: self.positions[start], end: self.positions[end - 1] + 1 }
    }

    /// Where the target's base sits in the attempt.
    fn base_span(&self) -> BaseSpan {
        let m_spans = spans(self.props.morphemes.iter().map(String::as_str));
        let idx = base_morpheme_indices(self.props);
        let projected = idx
            .first()
            .and_then(|&i| self.la.project_range(m_spans[i].0, m_spans[i].1));
        let span = match projected {
            Some((s, e)) => self.letter_span(s, e),
            None => self.letter_span(0, self.la.attempt.len().max(1)),
        };
        BaseSpan { start: span.start, end: span.end, base: self.base() }
    }

    fn suffix_rule(&self) -> Option<&crate::linguistics::SuffixRule> {
        let suffix = strip_connector(self.props.suffixes.first()?);
        self.k.suffixing.rule_for(&self.base(), suffix)
    }

    fn example(&self, phoneme: &str, grapheme: &str) -> Option<String> {
        let family: BTreeSet<String> = self.family().into_iter().collect();
        self.k
            .corpus
            .examples(phoneme, grapheme)
            .find(|w| *w != self.target() && *w != self.attempt && !family.contains(*w))
            .map(str::to_string)
    }

    fn contrast_note(&self) -> String {
        let parts: Vec<String> = self
            .changes
            .iter()
            .map(|(c, j)| {
                let ph = j.map(|j| self.props.phonemes[j].as_str()).unwrap_or("");
                let as_in = |g: &str| self.example(ph, g).map(|e| format!(", as in {e}")).unwrap_or_default();
                match c.op {
                    ChangeOp::Delete => format!("⟨{}⟩ is not part of {}", c.from, self.target()),
                    _ if is_silent(ph) => format!("⟨{}⟩ is silent in {} but still written", c.to, self.target()),
                    ChangeOp::Substitute if self.k.corpus.attests(ph, &c.from) => format!(
                        "⟨{}⟩ and ⟨{}⟩ can both spell {ph}, but {} uses ⟨{}⟩{}",
                        c.from,
                        c.to,
                        self.target(),
                        c.to,
                        as_in(&c.to)
                    ),
                    ChangeOp::Substitute => format!(
                        "{} spells {ph} with ⟨{}⟩, not ⟨{}⟩{}",
                        self.target(),
                        c.to,
                        c.from,
                        as_in(&c.to)
                    ),
                    ChangeOp::Insert => format!("⟨{}⟩ spells {ph} and has to be written{}", c.to, as_in(&c.to)),
                }
            })
            .collect();
        if parts.is_empty() {
            "the letters already match.".into()
        } else {
            format!("{}.", parts.join("; "))
        }
    }

    fn changes_text(&self) -> String {
        if self.changes.is_empty() {
            return "no letters change".into();
        }
        self.changes.iter().map(|(c, _)| c.to_string()).collect::<Vec<_>>().join(", ")
    }

    /// The grapheme/phoneme pair a mapping question should focus on.
    fn focus(&self) -> (String, String) {
        let changed = self
            .changes
            .iter()
            .filter_map(|(_, j)| *j)
            .find(|&j| !is_silent(&self.props.phonemes[j]));
        let j = changed.unwrap_or_else(|| {
            (0..self.props.phonemes.len())
                .find(|&j| !is_silent(&self.props.phonemes[j]))
                .unwrap_or(0)
        });
        (self.props.graphemes[j].clone(), self.props.phonemes[j].clone())
    }

    fn silent(&self) -> String {
        self.props
            .phonemes
            .iter()
            .position(|p| is_silent(p))
            .map(|j| self.props.graphemes[j].clone())
            .unwrap_or_default()
    }

    /// The affix a morpheme-check question asks about, and the learner's
    /// version of it.
    fn focus_affix(&self) -> (String, Option<String>, Option<String>) {
        let f = &self.diagnosis.features;
        let correct = if f.prefix_error {
            self.props.prefixes.first()
        } else if f.suffix_error {
            self.props.suffixes.first()
        } else {
            self.props.prefixes.first().or(self.props.suffixes.first())
        }
        .cloned()
        .unwrap_or_else(|| self.props.morphemes[0].clone());
        let idx = self.props.morphemes.iter().position(|m| *m == correct).unwrap_or(0);
        let (s, e) = spans(self.props.morphemes.iter().map(String::as_str))[idx];
        let learner = self.la.project(s, e);
        let dress = |bare: &str| {
            let mut out = String::new();
            if correct.starts_with('-') {
                out.push('-');
            }
            out.push_str(bare);
            if correct.ends_with('-') {
                out.push('-');
            }
            out
        };
        let learner = (!learner.is_empty() && learner != strip_connector(&correct)).then(|| dress(&learner));
        let distractor = if correct.ends_with('-') {
            self.k.affixes.prefixes.iter().find(|p| p.as_str() != strip_connector(&correct)).map(|p| format!("{p}-"))
        } else if correct.starts_with('-') {
            self.k.affixes.suffixes.iter().find(|p| p.as_str() != strip_connector(&correct)).map(|p| format!("-{p}"))
        } else {
            Some(self.attempt.to_string())
        };
        (correct, learner, distractor)
    }

    fn slots(&self) -> BTreeMap<&'static str, String> {
        let family = self.family();
        let (target_grapheme, phoneme) = self.focus();
        let (affix, _, _) = self.focus_affix();
        let mut homophones = vec![self.target().to_string()];
        homophones.extend(self.props.homophones.iter().cloned());
        let homophones = sorted_unique(homophones);
        let rule_text = self
            .suffix_rule()
            .map(|r| r.description.clone())
            .unwrap_or_else(|| "the spelling does not change at the join".into());
        BTreeMap::from([
            ("target", self.target().to_string()),
            ("attempt", self.attempt.to_string()),
            ("base", self.base()),
            ("reference", self.props.context_sentence.clone()),
            ("word_sum", self.word_sum()),
            ("affixes", self.affixes()),
            ("suffix", self.props.suffixes.first().cloned().unwrap_or_default()),
            ("rule_text", rule_text),
            ("family", join_and(&family)),
            ("changes", self.changes_text()),
            ("contrast_note", self.contrast_note()),
            (
                "origin",
                self.props.etymology.as_ref().map(|e| e.origin_language.clone()).unwrap_or_default(),
            ),
            ("affix", affix),
            ("phoneme", phoneme),
            ("target_grapheme", target_grapheme),
            ("relative", family.first().cloned().unwrap_or_default()),
            ("silent", self.silent()),
            ("homophone_list", join_and(&homophones)),
        ])
    }

    /// Family words for IN, everything else offered for OUT.
    fn sort_options(&self) -> (Vec<String>, Vec<String>) {
        let family = self.family();
        let mut options: Vec<String> = family.clone();
        options.extend(self.props.related_words.iter().filter(|w| !family.contains(w)).cloned());
        options.push(self.attempt.to_string());
        (sorted_unique(family), sorted_unique(options))
    }

    fn interaction(&self, t: &HypothesisTemplate) -> (Affordance, Option<VerificationCondition>, Vec<String>, Option<Reveal>) {
        use ActionBase::*;
        let choice = |expected: String, options: Vec<String>| {
            let mut options = options;
            options.push(expected.clone());
            let mut options = sorted_unique(options);
            if options.len() < 2 {
                options = sorted_unique([expected.clone(), self.attempt.to_string(), self.target().to_string()]);
            }
            (Affordance::MultipleChoice, Some(VerificationCondition::exact(expected)), options, None)
        };
        match t.action {
            DefineMeaning => {
                let mut family = vec![self.target().to_string()];
                family.extend(self.family());
                let e = SemanticExpectation {
                    target: self.target().to_string(),
                    family: sorted_unique(family),
                    context_sentence: self.props.context_sentence.clone(),
                };
                (Affordance::SpeechText, Some(VerificationCondition::semantic(e)), vec![], None)
            }
            BoxBase | Decompose => (
                Affordance::HighlightSpan,
                Some(VerificationCondition::overlaps_base(self.base_span())),
                vec![],
                None,
            ),
            WordSum => (
                Affordance::FreeText,
                Some(VerificationCondition::exact(self.sum_pieces().join(" + "))),
                vec![],
                None,
            ),
            InspectSuffixRule => {
                let expected = self.suffix_rule().map(|r| rule_label(&r.name)).unwrap_or_else(|| NO_CHANGE.into());
                let mut options: Vec<String> = self.k.suffixing.rules().iter().map(|r| rule_label(&r.name)).collect();
                options.push(NO_CHANGE.into());
                choice(expected, options)
            }
            BuildMatrix | CompareCousins | ContrastLookalikes => {
                let (family, options) = self.sort_options();
                (Affordance::DragSort, Some(VerificationCondition::members(family)), options, None)
            }
            SegmentAloud => (
                Affordance::FreeText,
                Some(VerificationCondition::exact(self.target())),
                vec![],
                None,
            ),
            IdentifyGraphemes => {
                let reveal = Reveal {
                    from: self.attempt.to_string(),
                    to: self.target().to_string(),
                    changes: self.changes.iter().map(|(c, _)| c.clone()).collect(),
                };
                (Affordance::RevealAnimation, None, vec![], Some(reveal))
            }
            TraceOrigin => {
                let origin = self.props.etymology.as_ref().map(|e| e.origin_language.clone()).unwrap_or_default();
                let others: Vec<String> = ORIGINS.iter().filter(|o| **o != origin).take(2).map(|o| o.to_string()).collect();
                choice(origin, others)
            }
            SortInOut | CompareFamilySpelling => (
                Affordance::FreeText,
                Some(VerificationCondition::members(sorted_unique(self.family()))),
                vec![],
                None,
            ),
            VerifyMorphemes => {
                let (correct, learner, distractor) = self.focus_affix();
                choice(correct, learner.into_iter().chain(distractor).collect())
            }
            MapPhonemes => {
                let (g, ph) = self.focus();
                let mut options: Vec<String> = self.k.corpus.graphemes_for(&ph).into_iter().map(str::to_string).collect();
                options.extend(self.changes.iter().filter(|(c, _)| c.op == ChangeOp::Substitute).map(|(c, _)| c.from.clone()));
                options.retain(|o| *o != g);
                options.truncate(3);
                choice(g, options)
            }
            CompareRelativesSound => {
                let silent = self.silent();
                let others: Vec<String> = self
                    .props
                    .graphemes
                    .iter()
                    .filter(|g| **g != silent)
                    .take(2)
                    .cloned()
                    .collect();
                choice(silent, others)
            }
            SortByMeaning => choice(self.target().to_string(), self.props.homophones.clone()),
            VisualContrast => choice(self.target().to_string(), vec![self.attempt.to_string()]),
        }
    }

    fn build(&self, trace: &InquiryTrace) -> ExecutionPlan {
        let slots = self.slots();
        let ids: Vec<String> = (1..=trace.steps.len()).map(|i| format!("h{i}")).collect();
        let mut nodes = BTreeMap::new();
        for (i, step) in trace.steps.iter().enumerate() {
            let t = self.k.templates.get(step.template);
            let next = ids.get(i + 1).cloned().unwrap_or_else(|| END_NODE.to_string());
            let (affordance, verification, options, reveal) = self.interaction(t);
            let on_false = if affordance.is_passive() { next.clone() } else { ids[i].clone() };
            nodes.insert(
                ids[i].clone(),
                PlanNode {
                    node_id: ids[i].clone(),
                    hypothesis: t.id,
                    instruction_text: fill(&t.prompt, &slots),
                    affordance,
                    verification,
                    on_true: Some(next),
                    on_false: Some(on_false),
                    feedback_true: fill(&t.feedback_true, &slots),
                    feedback_false: fill(&t.feedback_false, &slots),
                    effect_on_true: Some(t.effect),
                    options,
                    reveal,
                },
            );
        }
        let last = trace.steps.last().expect("traces are never empty").template;
        let closing = fill("{target} is spelled the way its meaning, structure and sounds ask for.", &slots);
        nodes.insert(
            END_NODE.to_string(),
            PlanNode {
                node_id: END_NODE.to_string(),
                hypothesis: last,
                instruction_text: fill("Now write {target} in your sentence.", &slots),
                affordance: Affordance::None,
                verification: None,
                on_true: None,
                on_false: None,
                feedback_true: closing.clone(),
                feedback_false: closing,
                effect_on_true: None,
                options: vec![],
                reveal: None,
            },
        );
        let templates = nodes.iter().map(|(k, n)| (k.clone(), n.hypothesis)).collect();
        ExecutionPlan {
            plan_id: String::new(),
            word: self.attempt.to_string(),
            target: self.target().to_string(),
            entry: ids.first().cloned().unwrap_or_else(|| END_NODE.to_string()),
            nodes,
            metadata: PlanMetadata { rationale: trace.rationale.clone(), trace: trace.ids(), templates },
        }
        .with_content_id()
    }
}

/// Offline synthesis: deterministic and always valid for legal traces.
pub(crate) fn build_plan(knowledge: &Knowledge, req: &ProgramRequest) -> ExecutionPlan {
    Builder::new(knowledge, &req.props, &req.attempt, &req.sentence, &req.diagnosis).build(&req.trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_filling_capitalizes() {
        let slots = BTreeMap::from([("homophone_list", "knew and new".to_string())]);
        assert_eq!(fill("{homophone_list} sound the same.", &slots), "Knew and new sound the same.");
    }

    #[test]
    fn join_lists() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(join_and(&s(&["a"])), "a");
        assert_eq!(join_and(&s(&["a", "b", "c"])), "a, b and c");
    }

    #[test]
    fn constractd_reveal_changes() {
        let k = Knowledge::shared();
        let props = k.lexicon.lookup("constructed").unwrap();
        let d = ErrorDiagnosis {
            features: crate::analysis::DiagnosticFeatures::no_error(),
            ranked_categories: vec![],
        };
        let b = Builder::new(k, props, "constractd", "", &d);
        let changes: Vec<String> = b.changes.iter().map(|(c, _)| c.to_string()).collect();
        assert_eq!(changes, ["⟨a⟩→⟨u⟩", "insert ⟨e⟩"]);
        assert_eq!(b.changes[0].0.at, 6);
        assert_eq!(b.changes[1].0.at, 9);
        assert_eq!(b.base_span().span(), Span { start: 3, end: 9 });
        assert_eq!(b.sum_pieces().join(" + "), "con + struct + ed");
    }

    #[test]
    fn reech_contrast_names_teach() {
        let k = Knowledge::shared();
        let props = k.lexicon.lookup("reach").unwrap();
        let d = ErrorDiagnosis {
            features: crate::analysis::DiagnosticFeatures::no_error(),
            ranked_categories: vec![],
        };
        let note = Builder::new(k, props, "reech", "", &d).contrast_note();
        assert!(note.contains("⟨ee⟩") && note.contains("⟨ea⟩") && note.contains("teach"), "{note}");
    }
}
