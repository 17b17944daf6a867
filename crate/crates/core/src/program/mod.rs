//! The executable inquiry program: plan types, validation and the canonical
//! document encoding.

pub mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::hypothesis::{LearningEffect, TemplateId};

pub use synth::{regenerate_on_failure, synthesize_program, Synthesized, DEFAULT_MAX_RETRIES};

/// Node id of the closing node every synthesized plan ends with.
pub const END_NODE: &str = "end";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Affordance {
    SpeechText,
    FreeText,
    HighlightSpan,
    DragSort,
    MultipleChoice,
    RevealAnimation,
    None,
}

impl Affordance {
    pub fn as_str(self) -> &'static str {
        match self {
            Affordance::SpeechText => "speech_text",
            Affordance::FreeText => "free_text",
            Affordance::HighlightSpan => "highlight_span",
            Affordance::DragSort => "drag_sort",
            Affordance::MultipleChoice => "multiple_choice",
            Affordance::RevealAnimation => "reveal_animation",
            Affordance::None => "none",
        }
    }

    /// Nodes that present something without asking for an answer.
    pub fn is_passive(self) -> bool {
        matches!(self, Affordance::RevealAnimation | Affordance::None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationKind {
    ExactMatch,
    SetMembership,
    SpanEquals,
    SpanOverlapsBase,
    SemanticCheck,
}

impl VerificationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VerificationKind::ExactMatch => "exact_match",
            VerificationKind::SetMembership => "set_membership",
            VerificationKind::SpanEquals => "span_equals",
            VerificationKind::SpanOverlapsBase => "span_overlaps_base",
            VerificationKind::SemanticCheck => "semantic_check",
        }
    }
}

/// Character offsets into the plan's `word`, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Where the target's base sits in the attempt, and how the target spells it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSpan {
    pub start: usize,
    pub end: usize,
    pub base: String,
}

impl BaseSpan {
    pub fn span(&self) -> Span {
        Span { start: self.start, end: self.end }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticExpectation {
    pub target: String,
    pub family: Vec<String>,
    pub context_sentence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expected {
    Text(String),
    Items(Vec<String>),
    BaseSpan(BaseSpan),
    Span(Span),
    Semantic(SemanticExpectation),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawVerification")]
pub struct VerificationCondition {
    pub kind: VerificationKind,
    pub expected: Expected,
    pub provider_required: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerification {
    kind: VerificationKind,
    expected: Expected,
    provider_required: bool,
}

impl TryFrom<RawVerification> for VerificationCondition {
    type Error = String;

    fn try_from(r: RawVerification) -> std::result::Result<Self, String> {
        let fits = matches!(
            (r.kind, &r.expected),
            (VerificationKind::ExactMatch, Expected::Text(_))
                | (VerificationKind::SetMembership, Expected::Items(_))
                | (VerificationKind::SpanEquals, Expected::Span(_))
                | (VerificationKind::SpanOverlapsBase, Expected::BaseSpan(_))
                | (VerificationKind::SemanticCheck, Expected::Semantic(_))
        );
        if !fits {
            return Err(format!("expected payload does not fit kind {}", r.kind.as_str()));
        }
        if r.provider_required != (r.kind == VerificationKind::SemanticCheck) {
            return Err(format!(
                "provider_required must be {} for {}",
                !r.provider_required,
                r.kind.as_str()
            ));
        }
        Ok(Self { kind: r.kind, expected: r.expected, provider_required: r.provider_required })
    }
}

impl VerificationCondition {
    pub fn exact(text: impl Into<String>) -> Self {
        Self { kind: VerificationKind::ExactMatch, expected: Expected::Text(text.into()), provider_required: false }
    }

    pub fn members(items: Vec<String>) -> Self {
        Self { kind: VerificationKind::SetMembership, expected: Expected::Items(items), provider_required: false }
    }

    pub fn span_equals(span: Span) -> Self {
        Self { kind: VerificationKind::SpanEquals, expected: Expected::Span(span), provider_required: false }
    }

    pub fn overlaps_base(span: BaseSpan) -> Self {
        Self { kind: VerificationKind::SpanOverlapsBase, expected: Expected::BaseSpan(span), provider_required: false }
    }

    pub fn semantic(e: SemanticExpectation) -> Self {
        Self { kind: VerificationKind::SemanticCheck, expected: Expected::Semantic(e), provider_required: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeOp {
    Substitute,
    Insert,
    Delete,
}

/// One grapheme-level change from attempt to target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevealChange {
    pub op: ChangeOp,
    /// Character offset in the attempt where the change applies.
    pub at: usize,
    pub from: String,
    pub to: String,
}

impl fmt::Display for RevealChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.op {
            ChangeOp::Substitute => write!(f, "⟨{}⟩→⟨{}⟩", self.from, self.to),
            ChangeOp::Insert => write!(f, "insert ⟨{}⟩", self.to),
            ChangeOp::Delete => write!(f, "remove ⟨{}⟩", self.from),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reveal {
    pub from: String,
    pub to: String,
    pub changes: Vec<RevealChange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanNode {
    pub node_id: String,
    pub hypothesis: TemplateId,
    pub instruction_text: String,
    pub affordance: Affordance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_true: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_false: Option<String>,
    pub feedback_true: String,
    pub feedback_false: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect_on_true: Option<LearningEffect>,
    /// Choices for multiple_choice and drag_sort nodes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reveal: Option<Reveal>,
}

impl PlanNode {
    pub fn is_terminal(&self) -> bool {
        self.on_true.is_none() && self.on_false.is_none()
    }

    pub fn edges(&self) -> impl Iterator<Item = &str> {
        self.on_true.iter().chain(self.on_false.iter()).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanMetadata {
    pub rationale: String,
    /// The selected trace, in order.
    pub trace: Vec<TemplateId>,
    /// Template behind each node.
    pub templates: BTreeMap<String, TemplateId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutionPlan {
    pub plan_id: String,
    /// The attempt as written; spans index into it.
    pub word: String,
    pub target: String,
    pub nodes: BTreeMap<String, PlanNode>,
    pub entry: String,
    pub metadata: PlanMetadata,
}

impl ExecutionPlan {
    /// Content hash of the plan with its id blanked.
    pub fn content_id(&self) -> String {
        let mut blank = self.clone();
        blank.plan_id.clear();
        let digest = Sha256::digest(crate::codec::canonical(&blank).as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn with_content_id(mut self) -> Self {
        self.plan_id = self.content_id();
        self
    }

    pub fn node(&self, id: &str) -> Option<&PlanNode> {
        self.nodes.get(id)
    }

    pub fn prompt_count(&self) -> usize {
        self.nodes.values().filter(|n| !n.affordance.is_passive()).count()
    }

    /// Upper bound on steps any response sequence needs to finish: each
    /// node once, plus one retry per prompt node.
    pub fn step_bound(&self) -> usize {
        self.nodes.len() + self.prompt_count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "node")]
pub enum Violation {
    MissingEntry(String),
    DanglingEdge(String),
    CycleDetected(Vec<String>),
    Unreachable(String),
    NoTerminal,
    NodeIdMismatch(String),
    HalfTerminal(String),
    MissingVerification(String),
    UnexpectedVerification(String),
    EmptySet(String),
    SpanOutOfRange(String),
    OptionsMismatch(String),
    MissingReveal(String),
    MissingFeedback(String),
    EmptyInstruction(String),
    UnfilledSlot(String),
    IllegalSelfLoop(String),
    DeadEnd(String),
    StepNodeCount(String),
    MetadataMismatch(String),
    PlanIdMismatch(String),
    Malformed(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, arg) = match self {
            Violation::MissingEntry(n) => ("MissingEntry", n.clone()),
            Violation::DanglingEdge(n) => ("DanglingEdge", n.clone()),
            Violation::CycleDetected(ns) => ("CycleDetected", ns.join(",")),
            Violation::Unreachable(n) => ("Unreachable", n.clone()),
            Violation::NoTerminal => ("NoTerminal", String::new()),
            Violation::NodeIdMismatch(n) => ("NodeIdMismatch", n.clone()),
            Violation::HalfTerminal(n) => ("HalfTerminal", n.clone()),
            Violation::MissingVerification(n) => ("MissingVerification", n.clone()),
            Violation::UnexpectedVerification(n) => ("UnexpectedVerification", n.clone()),
            Violation::EmptySet(n) => ("EmptySet", n.clone()),
            Violation::SpanOutOfRange(n) => ("SpanOutOfRange", n.clone()),
            Violation::OptionsMismatch(n) => ("OptionsMismatch", n.clone()),
            Violation::MissingReveal(n) => ("MissingReveal", n.clone()),
            Violation::MissingFeedback(n) => ("MissingFeedback", n.clone()),
            Violation::EmptyInstruction(n) => ("EmptyInstruction", n.clone()),
            Violation::UnfilledSlot(n) => ("UnfilledSlot", n.clone()),
            Violation::IllegalSelfLoop(n) => ("IllegalSelfLoop", n.clone()),
            Violation::DeadEnd(n) => ("DeadEnd", n.clone()),
            Violation::StepNodeCount(n) => ("StepNodeCount", n.clone()),
            Violation::MetadataMismatch(n) => ("MetadataMismatch", n.clone()),
            Violation::PlanIdMismatch(n) => ("PlanIdMismatch", n.clone()),
            Violation::Malformed(n) => ("Malformed", n.clone()),
        };
        write!(f, "{name}({arg})")
    }
}

fn has_unfilled_slot(text: &str) -> bool {
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if after[..close].chars().all(|c| c.is_ascii_lowercase() || c == '_') && close > 0 => {
                return true
            }
            _ => rest = after,
        }
    }
    false
}

/// Every problem with the plan; empty means valid.
pub fn validate_program(plan: &ExecutionPlan) -> Vec<Violation> {
    let mut out = Vec::new();
    let word_len = plan.word.chars().count();

    if !plan.nodes.contains_key(&plan.entry) {
        out.push(Violation::MissingEntry(plan.entry.clone()));
    }
    if plan.plan_id.is_empty() || plan.plan_id != plan.content_id() {
        out.push(Violation::PlanIdMismatch(plan.plan_id.clone()));
    }

    for (id, node) in &plan.nodes {
        if &node.node_id != id {
            out.push(Violation::NodeIdMismatch(id.clone()));
        }
        for to in node.edges() {
            if !plan.nodes.contains_key(to) {
                out.push(Violation::DanglingEdge(to.to_string()));
            }
        }
        if node.on_true.is_some() != node.on_false.is_some() {
            out.push(Violation::HalfTerminal(id.clone()));
        }
        if node.on_true.as_deref() == Some(id.as_str())
            || (node.on_false.as_deref() == Some(id.as_str()) && node.affordance.is_passive())
        {
            out.push(Violation::IllegalSelfLoop(id.clone()));
        }
        if node.instruction_text.trim().is_empty() {
            out.push(Violation::EmptyInstruction(id.clone()));
        }
        if [&node.instruction_text, &node.feedback_true, &node.feedback_false]
            .iter()
            .any(|t| has_unfilled_slot(t))
        {
            out.push(Violation::UnfilledSlot(id.clone()));
        }
        if !node.is_terminal() && node.feedback_false.trim().is_empty() {
            out.push(Violation::MissingFeedback(id.clone()));
        }
        match (&node.verification, node.affordance.is_passive()) {
            (None, false) => out.push(Violation::MissingVerification(id.clone())),
            (Some(_), true) => out.push(Violation::UnexpectedVerification(id.clone())),
            _ => {}
        }
        if node.affordance == Affordance::RevealAnimation && node.reveal.is_none() {
            out.push(Violation::MissingReveal(id.clone()));
        }
        if let Some(v) = &node.verification {
            match &v.expected {
                Expected::Items(items) if items.is_empty() => out.push(Violation::EmptySet(id.clone())),
                Expected::Span(s) if s.start >= s.end || s.end > word_len => {
                    out.push(Violation::SpanOutOfRange(id.clone()))
                }
                Expected::BaseSpan(s) if s.start >= s.end || s.end > word_len || s.base.is_empty() => {
                    out.push(Violation::SpanOutOfRange(id.clone()))
                }
                _ => {}
            }
            let choice = matches!(node.affordance, Affordance::MultipleChoice | Affordance::DragSort);
            let opts: BTreeSet<&str> = node.options.iter().map(String::as_str).collect();
            let listed = match &v.expected {
                Expected::Text(t) => opts.contains(t.as_str()),
                Expected::Items(xs) => xs.iter().all(|x| opts.contains(x.as_str())),
                _ => false,
            };
            if choice && (opts.len() < 2 || opts.len() != node.options.len() || !listed) {
                out.push(Violation::OptionsMismatch(id.clone()));
            }
        }
    }

    // Acyclicity by Kahn's algorithm; a prompt's retry self-loop is allowed.
    let mut indegree: BTreeMap<&str, usize> = plan.nodes.keys().map(|k| (k.as_str(), 0)).collect();
    let edges = |n: &PlanNode| -> BTreeSet<String> {
        n.edges()
            .filter(|to| *to != n.node_id && plan.nodes.contains_key(*to))
            .map(str::to_string)
            .collect()
    };
    for node in plan.nodes.values() {
        for to in edges(node) {
            *indegree.get_mut(to.as_str()).expect("known node") += 1;
        }
    }
    let mut ready: Vec<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
    let mut sorted = 0;
    while let Some(n) = ready.pop() {
        sorted += 1;
        for to in edges(&plan.nodes[n]) {
            let d = indegree.get_mut(to.as_str()).expect("known node");
            *d -= 1;
            if *d == 0 {
                ready.push(plan.nodes.get_key_value(&to).expect("known node").0);
            }
        }
    }
    let cyclic = sorted < plan.nodes.len();
    if cyclic {
        let stuck: Vec<String> = indegree
            .iter()
            .filter(|(_, d)| **d > 0)
            .map(|(k, _)| k.to_string())
            .collect();
        out.push(Violation::CycleDetected(stuck));
    }

    if plan.nodes.contains_key(&plan.entry) {
        let mut seen = BTreeSet::new();
        let mut stack = vec![plan.entry.as_str()];
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            if let Some(node) = plan.nodes.get(n) {
                stack.extend(node.edges());
            }
        }
        for id in plan.nodes.keys() {
            if !seen.contains(id.as_str()) {
                out.push(Violation::Unreachable(id.clone()));
            }
        }
    }
    if !plan.nodes.values().any(PlanNode::is_terminal) {
        out.push(Violation::NoTerminal);
    }

    // Both branches of every decision must lead to a terminal node.
    if !cyclic {
        let mut finishes: BTreeMap<&str, bool> = BTreeMap::new();
        fn reaches<'a>(plan: &'a ExecutionPlan, id: &'a str, memo: &mut BTreeMap<&'a str, bool>) -> bool {
            if let Some(v) = memo.get(id) {
                return *v;
            }
            let Some(node) = plan.nodes.get(id) else { return false };
            let v = node.is_terminal()
                || node
                    .edges()
                    .filter(|to| *to != id)
                    .all(|to| reaches(plan, to, memo))
                    && node.edges().any(|to| to != id);
            memo.insert(id, v);
            v
        }
        for id in plan.nodes.keys() {
            if !reaches(plan, id, &mut finishes) {
                out.push(Violation::DeadEnd(id.clone()));
            }
        }
    }

    let mut per_step: BTreeMap<TemplateId, usize> = BTreeMap::new();
    for node in plan.nodes.values() {
        *per_step.entry(node.hypothesis).or_default() += 1;
    }
    for (t, n) in &per_step {
        if *n > 3 {
            out.push(Violation::StepNodeCount(t.to_string()));
        }
    }
    for t in &plan.metadata.trace {
        if !per_step.contains_key(t) {
            out.push(Violation::StepNodeCount(t.to_string()));
        }
    }
    let expect: BTreeMap<String, TemplateId> =
        plan.nodes.iter().map(|(k, n)| (k.clone(), n.hypothesis)).collect();
    if expect != plan.metadata.templates {
        out.push(Violation::MetadataMismatch("templates".into()));
    }
    out
}

/// Canonical document: sorted keys, two-space indentation.
pub fn serialize_plan(plan: &ExecutionPlan) -> String {
    crate::codec::canonical_pretty(plan)
}

pub fn parse_plan(document: &str) -> Result<ExecutionPlan> {
    crate::codec::from_json_str(document)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, on_true: Option<&str>, on_false: Option<&str>) -> PlanNode {
        PlanNode {
            node_id: id.into(),
            hypothesis: TemplateId::new(7).unwrap(),
            instruction_text: "Type it.".into(),
            affordance: if on_true.is_some() { Affordance::FreeText } else { Affordance::None },
            verification: on_true.map(|_| VerificationCondition::exact("a lot")),
            on_true: on_true.map(Into::into),
            on_false: on_false.map(Into::into),
            feedback_true: "Yes.".into(),
            feedback_false: "No.".into(),
            effect_on_true: None,
            options: vec![],
            reveal: None,
        }
    }

    fn plan(nodes: Vec<PlanNode>) -> ExecutionPlan {
        let templates = nodes.iter().map(|n| (n.node_id.clone(), n.hypothesis)).collect();
        ExecutionPlan {
            plan_id: String::new(),
            word: "alot".into(),
            target: "a lot".into(),
            entry: "h1".into(),
            nodes: nodes.into_iter().map(|n| (n.node_id.clone(), n)).collect(),
            metadata: PlanMetadata { rationale: String::new(), trace: vec![TemplateId::new(7).unwrap()], templates },
        }
        .with_content_id()
    }

    #[test]
    fn minimal_plan_is_valid() {
        let p = plan(vec![node("h1", Some("end"), Some("h1")), node("end", None, None)]);
        assert_eq!(validate_program(&p), vec![]);
        assert_eq!(p.step_bound(), 3);
    }

    #[test]
    fn dangling_edge() {
        let p = plan(vec![node("h1", Some("end"), Some("h9")), node("end", None, None)]);
        assert!(validate_program(&p).contains(&Violation::DanglingEdge("h9".into())));
        assert_eq!(Violation::DanglingEdge("h9".into()).to_string(), "DanglingEdge(h9)");
    }

    #[test]
    fn cycle() {
        let p = plan(vec![
            node("h1", Some("h2"), Some("h1")),
            node("h2", Some("h1"), Some("end")),
            node("end", None, None),
        ]);
        let v = validate_program(&p);
        assert!(v.iter().any(|x| matches!(x, Violation::CycleDetected(_))), "{v:?}");
    }

    #[test]
    fn stale_id_and_empty_set() {
        let mut p = plan(vec![node("h1", Some("end"), Some("h1")), node("end", None, None)]);
        p.nodes.get_mut("h1").unwrap().verification = Some(VerificationCondition::members(vec![]));
        let v = validate_program(&p);
        assert!(v.contains(&Violation::EmptySet("h1".into())));
        assert!(v.iter().any(|x| matches!(x, Violation::PlanIdMismatch(_))));
    }

    #[test]
    fn round_trip_and_closed_enums() {
        let p = plan(vec![node("h1", Some("end"), Some("h1")), node("end", None, None)]);
        let doc = serialize_plan(&p);
        assert_eq!(parse_plan(&doc).unwrap(), p);
        assert_eq!(serialize_plan(&parse_plan(&doc).unwrap()), doc);
        let bad = doc.replace("\"free_text\"", "\"hologram\"");
        let err = parse_plan(&bad).unwrap_err().to_string();
        assert!(err.contains("affordance") && err.contains("hologram"), "{err}");
        assert!(parse_plan("").is_err());
    }

    #[test]
    fn payload_must_fit_kind() {
        let doc = r#"{"kind":"set_membership","expected":"x","provider_required":false}"#;
        assert!(serde_json::from_str::<VerificationCondition>(doc).is_err());
        let doc = r#"{"kind":"semantic_check","expected":{"target":"a","family":[],"context_sentence":""},"provider_required":false}"#;
        assert!(serde_json::from_str::<VerificationCondition>(doc).is_err());
        let doc = r#"{"kind":"span_equals","expected":{"start":1,"end":2},"provider_required":false}"#;
        assert!(serde_json::from_str::<VerificationCondition>(doc).is_ok());
    }

    #[test]
    fn slot_detection() {
        assert!(has_unfilled_slot("the base {base}"));
        assert!(!has_unfilled_slot("a set {x, y} or {} or {Caps}"));
    }
}
