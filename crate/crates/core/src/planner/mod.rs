//! Hypothesis filtering, candidate trace generation and trace selection.

pub mod legality;
pub mod search;
pub mod select;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::ErrorDiagnosis;
use crate::detection::AttemptContext;
use crate::error::{Error, Result};
use crate::hypothesis::fields::{facts, Value};
use crate::hypothesis::guard::{to_dnf, Literal};
use crate::hypothesis::{score_descriptor, GuardParams, HypothesisTemplate, LearningEffect, TemplateId, TemplateLibrary};
use crate::knowledge::Knowledge;
use crate::linguistics::WordProperties;
use crate::par::Execution;
use crate::providers::{ProviderHandle, Task};

pub use legality::{check_trace, TraceViolation};
pub use select::{score_trace, select_offline, TraceScore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Largest phoneme distance still counted as "sounds right".
    pub epsilon: f64,
    pub min_steps: usize,
    pub max_steps: usize,
    pub candidate_traces: usize,
    /// Share of a step's confidence taken from its descriptor score.
    pub descriptor_weight: f64,
    /// Largest template-set Jaccard similarity allowed between candidates.
    pub max_jaccard: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.15,
            min_steps: 2,
            max_steps: 5,
            candidate_traces: 3,
            descriptor_weight: 1.0,
            max_jaccard: 0.8,
        }
    }
}

impl PlannerConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(2 <= self.min_steps && self.min_steps <= self.max_steps && self.max_steps <= 5) {
            out.push(format!(
                "steps must satisfy 2 <= min_steps ({}) <= max_steps ({}) <= 5",
                self.min_steps, self.max_steps
            ));
        }
        if self.candidate_traces == 0 {
            out.push("candidate_traces must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.descriptor_weight) {
            out.push("descriptor_weight must lie in [0,1]".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            out.push("epsilon must lie in [0,1]".into());
        }
        if !(0.0..=1.0).contains(&self.max_jaccard) {
            out.push("max_jaccard must lie in [0,1]".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p.join("; ")))
        }
    }

    pub fn guard_params(&self) -> GuardParams {
        GuardParams { epsilon: self.epsilon }
    }
}

/// A template whose guard holds, with its confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Applicable {
    pub template: TemplateId,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Warrant {
    pub operator: String,
    pub params: BTreeMap<String, serde_json::Value>,
}

/// One instantiated hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceStep {
    pub template: TemplateId,
    pub confidence: f64,
    pub evidence: BTreeMap<String, serde_json::Value>,
    pub warrant: Warrant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InquiryTrace {
    pub steps: Vec<TraceStep>,
    pub rationale: String,
    /// Effects in the order the steps achieve them.
    pub achieved_effects: Vec<LearningEffect>,
}

impl InquiryTrace {
    pub fn ids(&self) -> Vec<TemplateId> {
        self.steps.iter().map(|s| s.template).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `H1 -> H8 -> H10`
    pub fn label(&self) -> String {
        self.ids().iter().map(ToString::to_string).collect::<Vec<_>>().join(" -> ")
    }
}

/// Unification of a guard's disjunctive normal form against fact tuples.
pub fn unifies(template: &HypothesisTemplate, facts: &BTreeMap<&str, Value>, params: &GuardParams) -> bool {
    to_dnf(&template.guard).iter().any(|conj| {
        conj.iter().all(|lit| match lit {
            Literal::Const(b) => *b,
            _ => lit
                .field()
                .and_then(|f| facts.get(f))
                .is_some_and(|v| lit.accepts(v, params)),
        })
    })
}

/// Templates whose guards unify with the attempt's facts. Nothing applies
/// when the attempt has no error.
pub fn matching_templates(
    library: &TemplateLibrary,
    diagnosis: &ErrorDiagnosis,
    props: &WordProperties,
    params: &GuardParams,
) -> Vec<TemplateId> {
    let tuples: BTreeMap<&str, Value> = facts(&diagnosis.features, props).into_iter().collect();
    if tuples.get("has_error") != Some(&Value::Bool(true)) {
        return Vec::new();
    }
    library
        .iter()
        .filter(|t| unifies(t, &tuples, params))
        .map(|t| t.id)
        .collect()
}

/// Matching templates paired with their descriptor confidence.
pub fn filter_hypotheses(
    knowledge: &Knowledge,
    diagnosis: &ErrorDiagnosis,
    props: &WordProperties,
    context: &AttemptContext,
    config: &PlannerConfig,
    provider: &ProviderHandle,
) -> Result<Vec<Applicable>> {
    let w = config.descriptor_weight;
    matching_templates(&knowledge.templates, diagnosis, props, &config.guard_params())
        .into_iter()
        .map(|id| {
            let t = knowledge.templates.get(id);
            let score = score_descriptor(t, diagnosis, context, provider)?;
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::SchemaViolation {
                    task: Task::DescriptorScore.to_string(),
                    path: "confidence".into(),
                    detail: format!("{score} is outside [0,1]"),
                });
            }
            Ok(Applicable { template: id, confidence: w * score + (1.0 - w) })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct TraceRequest {
    /// Which of the parallel generators is asking.
    pub instance: usize,
    pub applicable: Vec<Applicable>,
    pub diagnosis: ErrorDiagnosis,
    pub props: WordProperties,
    pub config: PlannerConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct TraceResponse {
    pub trace: Option<InquiryTrace>,
}

/// Up to `candidate_traces` legal traces, one generator call per instance.
pub fn generate_traces(
    knowledge: &Knowledge,
    applicable: &[Applicable],
    diagnosis: &ErrorDiagnosis,
    props: &WordProperties,
    config: &PlannerConfig,
    provider: &ProviderHandle,
    exec: Execution,
) -> Result<Vec<InquiryTrace>> {
    config.validate()?;
    if applicable.is_empty() {
        return Err(Error::NoLegalTrace("no hypothesis applies".into()));
    }
    let instances: Vec<usize> = (0..config.candidate_traces).collect();
    let replies = exec.map(&instances, |&instance| {
        provider.call::<_, TraceResponse>(
            Task::TraceGeneration,
            &TraceRequest {
                instance,
                applicable: applicable.to_vec(),
                diagnosis: diagnosis.clone(),
                props: props.clone(),
                config: config.clone(),
            },
        )
    });
    let mut out: Vec<InquiryTrace> = Vec::new();
    for reply in replies {
        let Some(trace) = reply?.trace else { continue };
        let violations = check_trace(&trace, diagnosis, knowledge, config);
        if !violations.is_empty() {
            tracing::warn!(trace = %trace.label(), ?violations, "dropping illegal candidate");
            continue;
        }
        if !out.iter().any(|t| t.ids() == trace.ids()) {
            out.push(trace);
        }
    }
    if out.is_empty() {
        return Err(Error::NoLegalTrace(format!(
            "no closing sequence of {}..={} steps over {}",
            config.min_steps,
            config.max_steps,
            applicable.iter().map(|a| a.template.to_string()).collect::<Vec<_>>().join(",")
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct SelectionRequest {
    pub candidates: Vec<InquiryTrace>,
    pub config: PlannerConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct SelectionResponse {
    pub index: usize,
    pub score: TraceScore,
}

pub fn select_trace(
    candidates: &[InquiryTrace],
    config: &PlannerConfig,
    provider: &ProviderHandle,
) -> Result<(InquiryTrace, TraceScore)> {
    if candidates.is_empty() {
        return Err(Error::NoLegalTrace("no candidates to select from".into()));
    }
    let resp: SelectionResponse = provider.call(
        Task::TraceSelection,
        &SelectionRequest { candidates: candidates.to_vec(), config: config.clone() },
    )?;
    let schema = |path: &str, detail: String| Error::SchemaViolation {
        task: Task::TraceSelection.to_string(),
        path: path.into(),
        detail,
    };
    if resp.index >= candidates.len() {
        return Err(schema("index", format!("{} is out of range", resp.index)));
    }
    if let Some(p) = resp.score.problems().into_iter().next() {
        return Err(schema("score", p));
    }
    Ok((candidates[resp.index].clone(), resp.score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{compute_features, rank_offline};
    use crate::hypothesis::evaluate_guard;
    use crate::linguistics::analyze_attempt;

    fn diagnosis(a: &str, t: &str) -> (ErrorDiagnosis, WordProperties) {
        let k = Knowledge::shared();
        let target = k.lexicon.lookup(t).unwrap().clone();
        let attempt = analyze_attempt(a, &target, &k.corpus, "");
        let features = compute_features(&attempt, &target, k);
        let ranked_categories = rank_offline(&features, PlannerConfig::default().epsilon);
        (ErrorDiagnosis { features, ranked_categories }, target)
    }

    fn ids(v: &[TemplateId]) -> Vec<u8> {
        v.iter().map(|t| t.number()).collect()
    }

    #[test]
    fn unification_agrees_with_direct_evaluation() {
        let k = Knowledge::shared();
        let params = PlannerConfig::default().guard_params();
        for (a, t) in [("reech", "reach"), ("runing", "running"), ("alot", "a lot"), ("constractd", "constructed")] {
            let (d, p) = diagnosis(a, t);
            let direct: Vec<TemplateId> = k
                .templates
                .iter()
                .filter(|tpl| evaluate_guard(tpl, &d.features, &p, &params))
                .map(|tpl| tpl.id)
                .collect();
            assert_eq!(matching_templates(&k.templates, &d, &p, &params), direct, "{a}");
        }
    }

    #[test]
    fn reech_filter() {
        let k = Knowledge::shared();
        let (d, p) = diagnosis("reech", "reach");
        let m = ids(&matching_templates(&k.templates, &d, &p, &PlannerConfig::default().guard_params()));
        for want in [8, 14, 10] {
            assert!(m.contains(&want), "{m:?}");
        }
        for not in [5, 7] {
            assert!(!m.contains(&not), "{m:?}");
        }
    }

    #[test]
    fn no_error_means_nothing_applies() {
        let k = Knowledge::shared();
        let (d, p) = diagnosis("reach", "reach");
        assert!(matching_templates(&k.templates, &d, &p, &PlannerConfig::default().guard_params()).is_empty());
    }

    #[test]
    fn config_bounds() {
        assert!(PlannerConfig::default().problems().is_empty());
        let bad = PlannerConfig { min_steps: 1, ..Default::default() };
        assert_eq!(bad.problems().len(), 1);
        let bad = PlannerConfig { max_steps: 6, candidate_traces: 0, ..Default::default() };
        assert_eq!(bad.problems().len(), 2);
    }
}
