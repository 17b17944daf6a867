//! Batch transcript generation over a corpus of marked writing samples.
//!
//! Each corpus line is `{"id": .., "text": ..}` where every misspelling is
//! written `[attempt|target]`.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::codec::{canonical, canonical_pretty};
use crate::detection::{sentence_around, AttemptContext};
use crate::error::{Error, Result};
use crate::hypothesis::TemplateId;
use crate::pipeline::Engine;
use crate::program::{ExecutionPlan, END_NODE};
use crate::runtime::{run_headless, transcript_jsonl, EventKind, PolicyKind, SessionEvent};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSample {
    pub id: String,
    pub text: String,
}

/// A sample with its markers resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedSample {
    pub id: String,
    /// The text as the learner wrote it.
    pub text: String,
    pub contexts: Vec<AttemptContext>,
}

fn marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[([^\[\]|]+)\|([^\[\]|]+)\]").expect("valid marker pattern"))
}

pub fn parse_corpus(text: &str) -> Result<Vec<CorpusSample>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Corpus { line: i + 1, message: e.to_string() })
        })
        .collect()
}

pub fn load_corpus(path: &Path) -> Result<Vec<CorpusSample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_corpus(&text)
}

pub fn mark(sample: &CorpusSample) -> MarkedSample {
    let mut text = String::new();
    let mut found = Vec::new();
    let mut last = 0;
    for cap in marker().captures_iter(&sample.text) {
        let whole = cap.get(0).expect("match");
        text.push_str(&sample.text[last..whole.start()]);
        let start = text.chars().count();
        let attempt = cap[1].trim().to_string();
        text.push_str(&attempt);
        found.push((attempt, cap[2].trim().to_string(), start));
        last = whole.end();
    }
    text.push_str(&sample.text[last..]);
    let contexts = found
        .into_iter()
        .map(|(attempt, target, start)| {
            let end = start + attempt.chars().count();
            AttemptContext {
                sentence: sentence_around(&text, start),
                attempt,
                target,
                document_excerpt: text.clone(),
                span: (start, end),
                uncertain: false,
                alternates: vec![],
            }
        })
        .collect();
    MarkedSample { id: sample.id.clone(), text, contexts }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intervention {
    pub node_id: String,
    pub hypothesis: TemplateId,
    pub question_type: String,
    pub action: String,
    /// Why this hypothesis was worth asking about.
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversationMeta {
    pub sample_id: String,
    pub index: usize,
    pub attempt: String,
    pub target: String,
    pub sentence: String,
    pub plan_id: String,
    pub selected_trace: Vec<TemplateId>,
    pub trace_rationale: String,
    pub interventions: Vec<Intervention>,
    pub intervention_count: usize,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conversation {
    pub meta: ConversationMeta,
    pub plan: ExecutionPlan,
    pub transcript: Vec<SessionEvent>,
}

impl Conversation {
    pub fn name(&self) -> String {
        format!("{}-{:02}", self.meta.sample_id, self.meta.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleFailure {
    pub sample_id: String,
    pub attempt: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSummary {
    pub policy: String,
    pub samples: usize,
    /// Samples with no marked misspelling.
    pub skipped: Vec<String>,
    pub conversations: usize,
    pub intervention_counts: Vec<usize>,
    pub all_within_bounds: bool,
    pub failures: Vec<SampleFailure>,
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub conversations: Vec<Conversation>,
    pub summary: BatchSummary,
}

/// Prompted nodes of the inquiry proper, the closing node excluded.
fn interventions(engine: &Engine, plan: &ExecutionPlan, transcript: &[SessionEvent], rationale: &str) -> Vec<Intervention> {
    let mut seen = BTreeSet::new();
    transcript
        .iter()
        .filter(|e| e.kind == EventKind::Prompted && e.node_id != END_NODE && seen.insert(e.node_id.clone()))
        .filter_map(|e| plan.node(&e.node_id))
        .map(|n| {
            let t = engine.knowledge.templates.get(n.hypothesis);
            Intervention {
                node_id: n.node_id.clone(),
                hypothesis: n.hypothesis,
                question_type: t.question_type.as_str().into(),
                action: t.action.as_str().into(),
                rationale: format!("{} ({}); {}", t.descriptor, t.warrant.operator, rationale),
            }
        })
        .collect()
}

fn converse(
    engine: &Engine,
    policy: &PolicyKind,
    sample_id: &str,
    index: usize,
    ctx: &AttemptContext,
) -> Result<Conversation> {
    let inquiry = engine.inquire(ctx)?;
    let plan = Arc::new(inquiry.plan);
    let mut p = policy.build()?;
    let session_id = format!("{sample_id}-{index:02}");
    let session = run_headless(plan.clone(), p.as_mut(), &engine.provider, &session_id)?;
    let interventions = interventions(engine, &plan, &session.transcript, &inquiry.selected.rationale);
    let meta = ConversationMeta {
        sample_id: sample_id.to_string(),
        index,
        attempt: ctx.attempt.clone(),
        target: ctx.target.clone(),
        sentence: ctx.sentence.clone(),
        plan_id: plan.plan_id.clone(),
        selected_trace: inquiry.selected.ids(),
        trace_rationale: inquiry.selected.rationale.clone(),
        intervention_count: interventions.len(),
        interventions,
        finished: session.is_finished(),
    };
    Ok(Conversation { meta, plan: (*plan).clone(), transcript: session.transcript })
}

/// One conversation per marked misspelling. Pipeline failures are collected
/// per sample rather than aborting the batch.
pub fn run_batch(engine: &Engine, corpus: &[CorpusSample], policy: &PolicyKind) -> BatchReport {
    let marked: Vec<MarkedSample> = corpus.iter().map(mark).collect();
    let mut skipped = Vec::new();
    let mut jobs = Vec::new();
    for m in &marked {
        if m.contexts.is_empty() {
            tracing::warn!(sample = %m.id, "no marked misspelling; skipped");
            skipped.push(m.id.clone());
        }
        for (i, ctx) in m.contexts.iter().enumerate() {
            jobs.push((m.id.as_str(), i + 1, ctx));
        }
    }
    let results = engine.execution.map(&jobs, |&(id, i, ctx)| converse(engine, policy, id, i, ctx));
    let mut conversations = Vec::new();
    let mut failures = Vec::new();
    for ((id, _, ctx), r) in jobs.iter().zip(results) {
        match r {
            Ok(c) => conversations.push(c),
            Err(e) => failures.push(SampleFailure {
                sample_id: id.to_string(),
                attempt: ctx.attempt.clone(),
                error: e.to_string(),
            }),
        }
    }
    let counts: Vec<usize> = conversations.iter().map(|c| c.meta.intervention_count).collect();
    let (lo, hi) = (engine.config.min_steps, engine.config.max_steps);
    let summary = BatchSummary {
        policy: policy.to_string(),
        samples: corpus.len(),
        skipped,
        conversations: conversations.len(),
        all_within_bounds: counts.iter().all(|&n| (lo..=hi).contains(&n)),
        intervention_counts: counts,
        failures,
    };
    BatchReport { conversations, summary }
}

/// Writes `<name>.plan.json`, `<name>.transcript.jsonl`, `<name>.meta.json`
/// per conversation and `summary.json`.
pub fn write_report(report: &BatchReport, out: &Path) -> Result<()> {
    let io = |p: &Path, e| Error::io(p.display().to_string(), e);
    std::fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let write = |name: String, body: String| {
        let p = out.join(name);
        std::fs::write(&p, body).map_err(|e| io(&p, e))
    };
    for c in &report.conversations {
        let n = c.name();
        write(format!("{n}.plan.json"), canonical_pretty(&c.plan))?;
        write(format!("{n}.transcript.jsonl"), transcript_jsonl(&c.transcript))?;
        write(format!("{n}.meta.json"), canonical_pretty(&c.meta))?;
    }
    write("summary.json".into(), canonical_pretty(&report.summary))
}

/// Canonical text of every plan and transcript, in conversation order.
pub fn fingerprint(report: &BatchReport) -> String {
    report
        .conversations
        .iter()
        .map(|c| format!("{}\n{}", canonical(&c.plan), transcript_jsonl(&c.transcript)))
        .collect()
}
