//! Verification of learner responses against a node's condition.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ResponsePayload;
use crate::error::Result;
use crate::linguistics::{edit_script, letters, Costs, EditOp};
use crate::program::{Expected, ExecutionPlan, PlanNode, SemanticExpectation, Span, VerificationKind};
use crate::providers::{ProviderHandle, Task};

/// One judged item: the whole response, or one entry of a free-text list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemVerdict {
    pub correct: bool,
    /// The item judged, when the response was split.
    pub item: Option<ResponsePayload>,
    pub feedback: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub items: Vec<ItemVerdict>,
    /// Observation attached to the response itself, e.g. partial evidence.
    pub note: Option<String>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.items.iter().any(|i| i.correct)
    }

    fn single(correct: bool, node: &PlanNode) -> Self {
        Self { items: vec![judged(correct, None, node)], note: None }
    }
}

fn judged(correct: bool, item: Option<ResponsePayload>, node: &PlanNode) -> ItemVerdict {
    let feedback = if correct { &node.feedback_true } else { &node.feedback_false };
    ItemVerdict { correct, item, feedback: feedback.clone() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticRequest {
    pub response: String,
    #[serde(flatten)]
    pub expectation: SemanticExpectation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticResponse {
    pub verdict: bool,
    pub rationale: String,
}

/// Lowercase, trim, collapse whitespace, and drop spaces around `+`.
pub fn normalize(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed.replace(" + ", "+").replace(" +", "+").replace("+ ", "+")
}

fn words(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Offline meaning check: the response uses the word (or a relative) and
/// shares context with the reference sentence.
pub fn semantic_offline(req: &SemanticRequest) -> SemanticResponse {
    let e = &req.expectation;
    let said = words(&req.response);
    let norm = normalize(&req.response);
    let mut own: BTreeSet<String> = e.family.iter().map(|w| w.to_lowercase()).collect();
    own.insert(e.target.to_lowercase());
    let uses = own.iter().any(|w| if w.contains(' ') { norm.contains(w.as_str()) } else { said.contains(w) });
    let context: BTreeSet<String> = words(&e.context_sentence).into_iter().filter(|w| !own.contains(w)).collect();
    let shared: Vec<&String> = said.intersection(&context).collect();
    let verdict = uses && !shared.is_empty();
    let rationale = match (uses, shared.is_empty()) {
        (false, _) => format!("the response does not use {} or a relative", e.target),
        (true, true) => format!("the response uses {} but not in a familiar context", e.target),
        (true, false) => format!(
            "the response uses {} alongside {}",
            e.target,
            shared.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        ),
    };
    SemanticResponse { verdict, rationale }
}

/// How `item` differs from `member`, letter by letter.
fn describe_diff(item: &str, member: &str) -> String {
    let a: Vec<char> = letters(item).chars().collect();
    let b: Vec<char> = letters(member).chars().collect();
    let (_, steps) = edit_script(&a, &b, Costs::UNIT);
    let parts: Vec<String> = steps
        .iter()
        .filter_map(|s| match s.op {
            EditOp::Match => None,
            EditOp::Delete => Some(format!("an extra ⟨{}⟩", a[s.from.unwrap()])),
            EditOp::Insert => Some(format!("a missing ⟨{}⟩", b[s.to.unwrap()])),
            EditOp::Substitute => Some(format!("⟨{}⟩ where ⟨{}⟩ belongs", a[s.from.unwrap()], b[s.to.unwrap()])),
        })
        .collect();
    format!("{item} has {} compared with {member}.", parts.join(" and "))
}

fn closest<'a>(item: &str, set: &'a [String]) -> Option<(u32, &'a str)> {
    let a: Vec<char> = letters(item).chars().collect();
    set.iter()
        .map(|m| {
            let b: Vec<char> = letters(m).chars().collect();
            (edit_script(&a, &b, Costs::UNIT).0, m.as_str())
        })
        .min()
}

fn member_verdicts(text: &str, set: &[String], node: &PlanNode) -> Verdict {
    let wanted: BTreeSet<String> = set.iter().map(|s| normalize(s)).collect();
    let items: Vec<&str> = text.split(|c: char| c == ',' || c == ';' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Verdict::single(false, node);
    }
    let judged_items = items
        .into_iter()
        .map(|raw| {
            let item = normalize(raw);
            let payload = Some(ResponsePayload::Text(item.clone()));
            if wanted.contains(&item) {
                return judged(true, payload, node);
            }
            let feedback = match closest(&item, set) {
                Some((d, m)) if d <= 2 => format!("{} {}", describe_diff(&item, m), node.feedback_false),
                _ => node.feedback_false.clone(),
            };
            ItemVerdict { correct: false, item: payload, feedback }
        })
        .collect();
    Verdict { items: judged_items, note: None }
}

fn span_text(word: &str, span: &Span) -> String {
    word.chars().skip(span.start).take(span.end.saturating_sub(span.start)).collect()
}

/// Judges `payload` against the node's verification condition. The payload
/// must already fit the node's affordance.
pub fn verify(node: &PlanNode, payload: &ResponsePayload, plan: &ExecutionPlan, provider: &ProviderHandle) -> Result<Verdict> {
    let Some(cond) = &node.verification else {
        return Ok(Verdict::single(true, node));
    };
    let v = match (&cond.expected, payload) {
        (Expected::Text(want), ResponsePayload::Text(got)) => Verdict::single(normalize(got) == normalize(want), node),
        (Expected::Text(want), ResponsePayload::Selection(got)) => {
            Verdict::single(got.len() == 1 && normalize(&got[0]) == normalize(want), node)
        }
        (Expected::Items(set), ResponsePayload::Text(got)) => member_verdicts(got, set, node),
        (Expected::Items(set), ResponsePayload::Selection(got)) => {
            let a: BTreeSet<String> = got.iter().map(|s| normalize(s)).collect();
            let b: BTreeSet<String> = set.iter().map(|s| normalize(s)).collect();
            Verdict::single(a == b, node)
        }
        (Expected::Span(want), ResponsePayload::Span(got)) => Verdict::single(want == got, node),
        (Expected::BaseSpan(base), ResponsePayload::Span(got)) => {
            let correct = got.overlaps(&base.span());
            let boxed = span_text(&plan.word, got);
            let note = (correct && boxed != base.base)
                .then(|| format!("partial evidence: boxed ⟨{boxed}⟩ where the base is spelled ⟨{}⟩", base.base));
            Verdict { items: vec![judged(correct, None, node)], note }
        }
        (Expected::Semantic(e), ResponsePayload::Text(got)) => {
            let resp: SemanticResponse = provider
                .call(Task::SemanticCheck, &SemanticRequest { response: got.clone(), expectation: e.clone() })?;
            Verdict { items: vec![judged(resp.verdict, None, node)], note: Some(resp.rationale) }
        }
        _ => Verdict::single(false, node),
    };
    debug_assert!(cond.kind != VerificationKind::SemanticCheck || cond.provider_required);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize("  Con +struct+ ED "), "con+struct+ed");
        assert_eq!(normalize("A   lot"), "a lot");
    }

    #[test]
    fn diff_names_extra_letter() {
        assert_eq!(describe_diff("insstruct", "instruct"), "insstruct has an extra ⟨s⟩ compared with instruct.");
        assert_eq!(describe_diff("strcture", "structure"), "strcture has a missing ⟨u⟩ compared with structure.");
    }

    #[test]
    fn semantic_offline_needs_word_and_context() {
        let e = SemanticExpectation {
            target: "constructed".into(),
            family: vec!["construct".into()],
            context_sentence: "The builder constructed a big house.".into(),
        };
        let ask = |r: &str| semantic_offline(&SemanticRequest { response: r.into(), expectation: e.clone() }).verdict;
        assert!(ask("The builder constructed the building."));
        assert!(!ask("The builder made the building."));
        assert!(!ask("constructed"));
    }
}
