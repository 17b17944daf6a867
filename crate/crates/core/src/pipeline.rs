//! End-to-end engine: detection, then properties, diagnosis, filtering,
//! trace generation and selection, and program synthesis.

use std::sync::Arc;

use serde::Serialize;

use crate::analysis::{diagnose, ErrorDiagnosis};
use crate::detection::{detect_with, AttemptContext, DetectionReport, Trigger};
use crate::error::{Error, Result};
use crate::knowledge::Knowledge;
use crate::linguistics::{synthesize_attempt_properties, synthesize_properties, WordProperties};
use crate::par::Execution;
use crate::planner::{filter_hypotheses, generate_traces, select_trace, Applicable, InquiryTrace, PlannerConfig, TraceScore};
use crate::program::{regenerate_on_failure, ExecutionPlan, DEFAULT_MAX_RETRIES};
use crate::providers::ProviderHandle;

#[derive(Debug, Clone)]
pub struct Engine {
    pub knowledge: Arc<Knowledge>,
    pub provider: ProviderHandle,
    pub config: PlannerConfig,
    pub execution: Execution,
    pub max_retries: usize,
}

/// Everything the pipeline decided for one attempt.
#[derive(Debug, Clone, Serialize)]
pub struct Inquiry {
    pub context: AttemptContext,
    pub target: WordProperties,
    pub attempt: WordProperties,
    pub diagnosis: ErrorDiagnosis,
    pub applicable: Vec<Applicable>,
    pub candidates: Vec<InquiryTrace>,
    pub selected: InquiryTrace,
    pub score: TraceScore,
    pub plan: ExecutionPlan,
    /// Rejected synthesis attempts before `plan` validated.
    pub retry_count: usize,
}

impl Engine {
    pub fn new(knowledge: Arc<Knowledge>, provider: ProviderHandle) -> Self {
        Self {
            knowledge,
            provider,
            config: PlannerConfig::default(),
            execution: Execution::default(),
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }

    /// Bundled knowledge with the offline backend.
    pub fn offline() -> Self {
        let k = Knowledge::shared_arc();
        Self::new(k.clone(), ProviderHandle::offline(k))
    }

    pub fn with_config(mut self, config: PlannerConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn detect(&self, document: &str) -> Result<DetectionReport> {
        detect_with(document, Trigger::ExplicitCheck, &self.knowledge, &self.provider)
    }

    pub fn inquire(&self, context: &AttemptContext) -> Result<Inquiry> {
        self.config.validate()?;
        if let Some(p) = context.problems().into_iter().next() {
            return Err(Error::Config(format!("malformed attempt context: {p}")));
        }
        let k = &*self.knowledge;
        let target = synthesize_properties(&context.target, &context.sentence, &self.provider)?;
        target.validate()?;
        let attempt = synthesize_attempt_properties(&context.attempt, &context.sentence, &target, &self.provider)?;
        let diagnosis = diagnose(&attempt, &target, context, k, self.config.epsilon, &self.provider)?;
        let applicable = filter_hypotheses(k, &diagnosis, &target, context, &self.config, &self.provider)?;
        let candidates =
            generate_traces(k, &applicable, &diagnosis, &target, &self.config, &self.provider, self.execution)?;
        let (selected, score) = select_trace(&candidates, &self.config, &self.provider)?;
        let synth = regenerate_on_failure(&selected, &target, &diagnosis, context, &self.provider, self.max_retries)?;
        tracing::debug!(attempt = %context.attempt, trace = %selected.label(), plan = %synth.plan.plan_id, "inquiry planned");
        Ok(Inquiry {
            context: context.clone(),
            target,
            attempt,
            diagnosis,
            applicable,
            candidates,
            selected,
            score,
            plan: synth.plan,
            retry_count: synth.retry_count,
        })
    }

    pub fn plan(&self, context: &AttemptContext) -> Result<ExecutionPlan> {
        self.inquire(context).map(|i| i.plan)
    }
}
