//! Step-wise execution of a plan against learner responses.

pub mod policy;
pub mod verify;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::LearningEffect;
use crate::program::{validate_program, Affordance, ExecutionPlan, PlanNode, Span};
use crate::providers::ProviderHandle;

pub use policy::{run_headless, Policy, PolicyKind};
pub use verify::{verify, Verdict};

/// Failed attempts a prompt node allows before the session moves on.
pub const MAX_RETRIES: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponsePayload {
    Text(String),
    Span(Span),
    Selection(Vec<String>),
    Ack,
}

impl ResponsePayload {
    pub fn kind(&self) -> &'static str {
        match self {
            ResponsePayload::Text(_) => "text",
            ResponsePayload::Span(_) => "span",
            ResponsePayload::Selection(_) => "selection",
            ResponsePayload::Ack => "ack",
        }
    }

    pub fn fits(&self, affordance: Affordance) -> bool {
        matches!(
            (affordance, self),
            (Affordance::SpeechText | Affordance::FreeText, ResponsePayload::Text(_))
                | (Affordance::HighlightSpan, ResponsePayload::Span(_))
                | (Affordance::DragSort | Affordance::MultipleChoice, ResponsePayload::Selection(_))
                | (Affordance::RevealAnimation | Affordance::None, ResponsePayload::Ack)
        )
    }
}

fn expected_kind(a: Affordance) -> &'static str {
    match a {
        Affordance::SpeechText | Affordance::FreeText => "text",
        Affordance::HighlightSpan => "span",
        Affordance::DragSort | Affordance::MultipleChoice => "selection",
        Affordance::RevealAnimation | Affordance::None => "ack",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerResponse {
    pub node_id: String,
    pub payload: ResponsePayload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Prompted,
    Responded,
    VerifiedTrue,
    VerifiedFalse,
    Revealed,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEvent {
    /// Logical clock; strictly increasing within a session.
    pub seq: u64,
    pub node_id: String,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<ResponsePayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: String,
    pub plan: Arc<ExecutionPlan>,
    /// None once the session has finished.
    pub current: Option<String>,
    pub transcript: Vec<SessionEvent>,
    pub effects: BTreeSet<LearningEffect>,
    pub retry_counts: BTreeMap<String, u32>,
}

/// What a client needs to render the current state.
#[derive(Debug, Clone, Serialize)]
pub struct SessionView<'a> {
    pub session_id: &'a str,
    pub plan_id: &'a str,
    pub finished: bool,
    pub current: Option<&'a PlanNode>,
    pub effects: &'a BTreeSet<LearningEffect>,
    pub transcript: &'a [SessionEvent],
}

impl Session {
    pub fn start(plan: Arc<ExecutionPlan>, session_id: impl Into<String>) -> Result<Self> {
        let violations = validate_program(&plan);
        if !violations.is_empty() {
            return Err(Error::InvalidPlan(violations));
        }
        let mut s = Self {
            session_id: session_id.into(),
            current: None,
            plan,
            transcript: Vec::new(),
            effects: BTreeSet::new(),
            retry_counts: BTreeMap::new(),
        };
        let entry = s.plan.entry.clone();
        s.enter(entry);
        Ok(s)
    }

    pub fn is_finished(&self) -> bool {
        self.current.is_none()
    }

    pub fn current_node(&self) -> Option<&PlanNode> {
        self.current.as_deref().and_then(|id| self.plan.node(id))
    }

    pub fn view(&self) -> SessionView<'_> {
        SessionView {
            session_id: &self.session_id,
            plan_id: &self.plan.plan_id,
            finished: self.is_finished(),
            current: self.current_node(),
            effects: &self.effects,
            transcript: &self.transcript,
        }
    }

    fn push(&mut self, node_id: &str, kind: EventKind, payload: Option<ResponsePayload>, detail: Option<String>) {
        let seq = self.transcript.len() as u64;
        self.transcript.push(SessionEvent { seq, node_id: node_id.to_string(), kind, payload, detail });
    }

    fn enter(&mut self, id: String) {
        let text = self.plan.nodes[&id].instruction_text.clone();
        self.push(&id, EventKind::Prompted, None, Some(text));
        self.current = Some(id);
    }

    fn advance(&mut self, from: &str, next: Option<String>) {
        match next {
            Some(n) => self.enter(n),
            None => {
                self.push(from, EventKind::Finished, None, None);
                self.current = None;
            }
        }
    }

    fn current_checked(&self, node_id: &str) -> Result<PlanNode> {
        let Some(cur) = &self.current else {
            return Err(Error::SessionFinished);
        };
        if cur != node_id {
            return Err(Error::WrongNode { expected: cur.clone(), got: node_id.to_string() });
        }
        Ok(self.plan.nodes[cur].clone())
    }

    fn fail(&mut self, node: &PlanNode) {
        let id = node.node_id.clone();
        if node.on_false.as_deref() == Some(id.as_str()) {
            let used = self.retry_counts.entry(id.clone()).or_insert(0);
            if *used < MAX_RETRIES {
                *used += 1;
                self.enter(id);
                return;
            }
            // Out of retries: move on without recording the effect.
            self.advance(&id, node.on_true.clone());
            return;
        }
        self.advance(&id, node.on_false.clone());
    }

    /// Applies one response. On error the session is left unchanged.
    pub fn step(&mut self, response: &LearnerResponse, provider: &ProviderHandle) -> Result<()> {
        let node = self.current_checked(&response.node_id)?;
        if !response.payload.fits(node.affordance) {
            return Err(Error::AffordanceMismatch {
                node: node.node_id.clone(),
                expected: expected_kind(node.affordance).into(),
                got: response.payload.kind().into(),
            });
        }
        let id = node.node_id.clone();
        if node.affordance.is_passive() {
            if node.affordance == Affordance::RevealAnimation {
                let changes = node.reveal.as_ref().map(|r| {
                    r.changes.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
                });
                let detail = match changes {
                    Some(c) => format!("{c}. {}", node.feedback_true),
                    None => node.feedback_true.clone(),
                };
                self.push(&id, EventKind::Revealed, None, Some(detail));
                self.effects.extend(node.effect_on_true);
            }
            self.advance(&id, node.on_true.clone());
            return Ok(());
        }
        let verdict = verify::verify(&node, &response.payload, &self.plan, provider)?;
        self.push(&id, EventKind::Responded, Some(response.payload.clone()), verdict.note.clone());
        for item in &verdict.items {
            let kind = if item.correct { EventKind::VerifiedTrue } else { EventKind::VerifiedFalse };
            self.push(&id, kind, item.item.clone(), Some(item.feedback.clone()));
        }
        if verdict.passed() {
            self.effects.extend(node.effect_on_true);
            self.advance(&id, node.on_true.clone());
        } else {
            self.fail(&node);
        }
        Ok(())
    }

    /// Records a response that could not be applied as a failed attempt at
    /// the current node. Used by headless runs, where a policy's answer of
    /// the wrong shape must still make progress.
    pub fn reject(&mut self, node_id: &str, reason: &str) -> Result<()> {
        let node = self.current_checked(node_id)?;
        if node.affordance.is_passive() {
            self.advance(&node.node_id, node.on_true.clone());
            return Ok(());
        }
        self.push(&node.node_id, EventKind::VerifiedFalse, None, Some(reason.to_string()));
        self.fail(&node);
        Ok(())
    }
}

/// One canonical JSON object per line.
pub fn transcript_jsonl(events: &[SessionEvent]) -> String {
    events.iter().map(|e| crate::codec::canonical(e) + "\n").collect()
}

pub fn parse_transcript(text: &str) -> Result<Vec<SessionEvent>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(crate::codec::from_json_str)
        .collect()
}
