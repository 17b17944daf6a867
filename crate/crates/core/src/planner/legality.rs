//! Standalone trace legality check, kept apart from the generator.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{InquiryTrace, PlannerConfig};
use crate::analysis::ErrorDiagnosis;
use crate::hypothesis::{LearningEffect, TemplateId};
use crate::knowledge::Knowledge;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceViolation {
    Length { steps: usize, min: usize, max: usize },
    RepeatedTemplate { template: TemplateId },
    UnmetPrecondition { template: TemplateId, missing: Vec<LearningEffect> },
    RepeatedQuestionType { template: TemplateId },
    EffectsMismatch,
    ConfidenceOutOfRange { template: TemplateId },
    NotClosed { category: String },
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Length { steps, min, max } => write!(f, "{steps} steps, expected {min}..={max}"),
            Self::RepeatedTemplate { template } => write!(f, "{template} appears twice"),
            Self::UnmetPrecondition { template, missing } => {
                let m: Vec<&str> = missing.iter().map(|e| e.as_str()).collect();
                write!(f, "{template} needs {} first", m.join(", "))
            }
            Self::RepeatedQuestionType { template } => {
                write!(f, "{template} repeats a question type without building on it")
            }
            Self::EffectsMismatch => f.write_str("achieved_effects do not match the steps"),
            Self::ConfidenceOutOfRange { template } => write!(f, "{template} confidence outside [0,1]"),
            Self::NotClosed { category } => write!(f, "{category} is left unresolved"),
        }
    }
}

pub fn check_trace(
    trace: &InquiryTrace,
    diagnosis: &ErrorDiagnosis,
    knowledge: &Knowledge,
    config: &PlannerConfig,
) -> Vec<TraceViolation> {
    let mut out = Vec::new();
    let n = trace.steps.len();
    if n < config.min_steps || n > config.max_steps {
        out.push(TraceViolation::Length { steps: n, min: config.min_steps, max: config.max_steps });
    }

    let mut seen = BTreeSet::new();
    let mut achieved: Vec<LearningEffect> = Vec::new();
    for (i, step) in trace.steps.iter().enumerate() {
        let t = knowledge.templates.get(step.template);
        if !seen.insert(step.template) {
            out.push(TraceViolation::RepeatedTemplate { template: step.template });
        }
        if !(0.0..=1.0).contains(&step.confidence) {
            out.push(TraceViolation::ConfidenceOutOfRange { template: step.template });
        }
        let missing: Vec<LearningEffect> = t
            .effect_preconditions
            .iter()
            .filter(|e| !achieved.contains(e))
            .copied()
            .collect();
        if !missing.is_empty() {
            out.push(TraceViolation::UnmetPrecondition { template: step.template, missing });
        }
        let earlier: Vec<_> = trace.steps[..i]
            .iter()
            .map(|s| knowledge.templates.get(s.template))
            .filter(|s| s.question_type == t.question_type)
            .collect();
        if !earlier.is_empty() {
            let nested = earlier.iter().any(|s| t.effect_preconditions.contains(&s.effect));
            let category = knowledge.taxonomy.category_of(t.effect);
            let fresh = category.is_some_and(|c| !achieved.iter().any(|e| knowledge.taxonomy.resolves(*e, c)));
            if !(nested && fresh) {
                out.push(TraceViolation::RepeatedQuestionType { template: step.template });
            }
        }
        achieved.push(t.effect);
    }
    if achieved != trace.achieved_effects {
        out.push(TraceViolation::EffectsMismatch);
    }
    for category in diagnosis.rank_one() {
        if !achieved.iter().any(|e| knowledge.taxonomy.resolves(*e, category)) {
            out.push(TraceViolation::NotClosed { category: category.as_str().into() });
        }
    }
    out
}
