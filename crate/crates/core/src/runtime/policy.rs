//! Simulated learners and the headless runner.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{LearnerResponse, ResponsePayload, Session};
use crate::error::{Error, Result};
use crate::program::{Affordance, ExecutionPlan, Expected, PlanNode, Span, Violation};
use crate::providers::ProviderHandle;

/// Produces a response for a prompt node.
pub trait Policy {
    fn respond(&mut self, node: &PlanNode, plan: &ExecutionPlan) -> ResponsePayload;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyKind {
    AlwaysCorrect,
    AlwaysWrong,
    EmptyResponse,
    Scripted(PathBuf),
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::AlwaysCorrect => f.write_str("always-correct"),
            PolicyKind::AlwaysWrong => f.write_str("always-wrong"),
            PolicyKind::EmptyResponse => f.write_str("empty-response"),
            PolicyKind::Scripted(p) => write!(f, "scripted:{}", p.display()),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "always-correct" => Ok(PolicyKind::AlwaysCorrect),
            "always-wrong" => Ok(PolicyKind::AlwaysWrong),
            "empty-response" => Ok(PolicyKind::EmptyResponse),
            _ => match s.strip_prefix("scripted:") {
                Some(p) if !p.is_empty() => Ok(PolicyKind::Scripted(p.into())),
                _ => Err(Error::Config(format!(
                    "unknown policy {s:?}; expected always-correct, always-wrong, empty-response or scripted:<file>"
                ))),
            },
        }
    }
}

impl PolicyKind {
    pub fn build(&self) -> Result<Box<dyn Policy + Send>> {
        Ok(match self {
            PolicyKind::AlwaysCorrect => Box::new(AlwaysCorrect),
            PolicyKind::AlwaysWrong => Box::new(AlwaysWrong),
            PolicyKind::EmptyResponse => Box::new(EmptyResponse),
            PolicyKind::Scripted(p) => Box::new(Scripted::load(p)?),
        })
    }
}

pub struct AlwaysCorrect;

impl Policy for AlwaysCorrect {
    fn respond(&mut self, node: &PlanNode, _plan: &ExecutionPlan) -> ResponsePayload {
        let Some(v) = &node.verification else { return ResponsePayload::Ack };
        match &v.expected {
            Expected::Text(t) if node.affordance == Affordance::MultipleChoice => ResponsePayload::Selection(vec![t.clone()]),
            Expected::Text(t) => ResponsePayload::Text(t.clone()),
            Expected::Items(items) if node.affordance == Affordance::DragSort => ResponsePayload::Selection(items.clone()),
            Expected::Items(items) => ResponsePayload::Text(items.join(", ")),
            Expected::Span(s) => ResponsePayload::Span(*s),
            Expected::BaseSpan(b) => ResponsePayload::Span(b.span()),
            Expected::Semantic(e) => ResponsePayload::Text(e.context_sentence.clone()),
        }
    }
}

pub struct AlwaysWrong;

impl Policy for AlwaysWrong {
    fn respond(&mut self, node: &PlanNode, plan: &ExecutionPlan) -> ResponsePayload {
        let Some(v) = &node.verification else { return ResponsePayload::Ack };
        match (&v.expected, node.affordance) {
            (Expected::Text(t), Affordance::MultipleChoice) => {
                let other = node.options.iter().find(|o| *o != t).cloned();
                ResponsePayload::Selection(other.into_iter().collect())
            }
            (_, Affordance::DragSort | Affordance::MultipleChoice) => ResponsePayload::Selection(vec![]),
            (Expected::Span(s), _) => ResponsePayload::Span(away_from(*s, plan)),
            (Expected::BaseSpan(b), _) => ResponsePayload::Span(away_from(b.span(), plan)),
            _ => ResponsePayload::Text("zzz".into()),
        }
    }
}

/// A span that does not touch `s`; empty when `s` covers the whole word.
fn away_from(s: Span, plan: &ExecutionPlan) -> Span {
    let len = plan.word.chars().count();
    if s.start > 0 {
        Span { start: 0, end: 1 }
    } else if s.end < len {
        Span { start: len - 1, end: len }
    } else {
        Span { start: 0, end: 0 }
    }
}

/// Acknowledges everything, which no prompt node accepts.
pub struct EmptyResponse;

impl Policy for EmptyResponse {
    fn respond(&mut self, _node: &PlanNode, _plan: &ExecutionPlan) -> ResponsePayload {
        ResponsePayload::Ack
    }
}

/// One line of a response script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptLine {
    Text(String),
    Span(Span),
    /// Boxes the first occurrence of this text in the attempt.
    SpanText(String),
    Selection(Vec<String>),
    Ack,
}

/// Replays responses for prompt nodes in order; acks once exhausted.
pub struct Scripted {
    lines: std::vec::IntoIter<ScriptLine>,
}

impl Scripted {
    pub fn new(lines: Vec<ScriptLine>) -> Self {
        Self { lines: lines.into_iter() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Parse { location: format!("script line {}", i + 1), message: e.to_string() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(lines))
    }
}

fn find_span(word: &str, needle: &str) -> Span {
    match word.find(needle) {
        Some(b) => {
            let start = word[..b].chars().count();
            Span { start, end: start + needle.chars().count() }
        }
        None => Span { start: 0, end: 0 },
    }
}

impl Policy for Scripted {
    fn respond(&mut self, _node: &PlanNode, plan: &ExecutionPlan) -> ResponsePayload {
        match self.lines.next() {
            Some(ScriptLine::Text(t)) => ResponsePayload::Text(t),
            Some(ScriptLine::Span(s)) => ResponsePayload::Span(s),
            Some(ScriptLine::SpanText(t)) => ResponsePayload::Span(find_span(&plan.word, &t)),
            Some(ScriptLine::Selection(v)) => ResponsePayload::Selection(v),
            Some(ScriptLine::Ack) | None => ResponsePayload::Ack,
        }
    }
}

/// Runs a plan to completion with simulated responses. Passive nodes are
/// acknowledged; a response of the wrong shape counts as a failed attempt.
pub fn run_headless(
    plan: Arc<ExecutionPlan>,
    policy: &mut dyn Policy,
    provider: &ProviderHandle,
    session_id: &str,
) -> Result<Session> {
    let mut session = Session::start(plan.clone(), session_id)?;
    let bound = plan.step_bound();
    for _ in 0..bound {
        let Some(node) = session.current_node().cloned() else {
            return Ok(session);
        };
        let payload =
            if node.affordance.is_passive() { ResponsePayload::Ack } else { policy.respond(&node, &plan) };
        let response = LearnerResponse { node_id: node.node_id.clone(), payload };
        match session.step(&response, provider) {
            Ok(()) => {}
            Err(Error::AffordanceMismatch { expected, got, .. }) => {
                session.reject(&node.node_id, &format!("expected a {expected} response, got {got}"))?;
            }
            Err(e) => return Err(e),
        }
    }
    match session.current.clone() {
        None => Ok(session),
        Some(stuck) => Err(Error::InvalidPlan(vec![Violation::DeadEnd(stuck)])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_names_round_trip() {
        for s in ["always-correct", "always-wrong", "empty-response", "scripted:a.jsonl"] {
            assert_eq!(s.parse::<PolicyKind>().unwrap().to_string(), s);
        }
        assert!("sometimes".parse::<PolicyKind>().is_err());
        assert!("scripted:".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn script_lines_parse() {
        let s = Scripted::parse("{\"text\":\"hi\"}\n\n{\"span_text\":\"stract\"}\n\"ack\"\n").unwrap();
        assert_eq!(s.lines.len(), 3);
        assert!(Scripted::parse("{\"bogus\":1}").is_err());
    }

    #[test]
    fn span_text_uses_char_offsets() {
        assert_eq!(find_span("constractd", "stract"), Span { start: 3, end: 9 });
        assert_eq!(find_span("constractd", "xyz"), Span { start: 0, end: 0 });
    }
}
