//! Offline trace generation: depth-bounded search over effect preconditions.

use std::collections::{BTreeMap, BTreeSet};

use super::{Applicable, InquiryTrace, PlannerConfig, TraceStep, Warrant};
use crate::analysis::{Category, ErrorDiagnosis, Taxonomy};
use crate::hypothesis::{bind_evidence, HypothesisTemplate, LearningEffect, TemplateId};
use crate::knowledge::Knowledge;
use crate::linguistics::WordProperties;

struct Search<'a> {
    pool: Vec<(&'a HypothesisTemplate, f64)>,
    taxonomy: &'a Taxonomy,
    targets: Vec<Category>,
    config: &'a PlannerConfig,
    /// Template set -> first (lexicographically smallest) legal order.
    found: BTreeMap<BTreeSet<TemplateId>, Vec<usize>>,
}

impl Search<'_> {
    fn resolved(&self, achieved: &BTreeSet<LearningEffect>) -> BTreeSet<Category> {
        achieved.iter().filter_map(|e| self.taxonomy.category_of(*e)).collect()
    }

    fn closed(&self, achieved: &BTreeSet<LearningEffect>) -> bool {
        let resolved = self.resolved(achieved);
        self.targets.iter().all(|c| resolved.contains(c))
    }

    fn can_follow(&self, seq: &[usize], achieved: &BTreeSet<LearningEffect>, next: usize) -> bool {
        let t = self.pool[next].0;
        if seq.contains(&next) || !t.effect_preconditions.is_subset(achieved) {
            return false;
        }
        let same_type: Vec<&HypothesisTemplate> = seq
            .iter()
            .map(|&i| self.pool[i].0)
            .filter(|s| s.question_type == t.question_type)
            .collect();
        if same_type.is_empty() {
            return true;
        }
        // A question type may recur only as a nested follow-up that builds on
        // the earlier step and opens a category not yet resolved.
        let builds_on = same_type.iter().any(|s| t.effect_preconditions.contains(&s.effect));
        let opens = self
            .taxonomy
            .category_of(t.effect)
            .is_some_and(|c| !self.resolved(achieved).contains(&c));
        builds_on && opens
    }

    fn dfs(&mut self, seq: &mut Vec<usize>, achieved: &mut BTreeSet<LearningEffect>) {
        if seq.len() >= self.config.min_steps && self.closed(achieved) {
            let key: BTreeSet<TemplateId> = seq.iter().map(|&i| self.pool[i].0.id).collect();
            self.found.entry(key).or_insert_with(|| seq.clone());
        }
        if seq.len() == self.config.max_steps {
            return;
        }
        for next in 0..self.pool.len() {
            if !self.can_follow(seq, achieved, next) {
                continue;
            }
            let effect = self.pool[next].0.effect;
            seq.push(next);
            achieved.insert(effect);
            self.dfs(seq, achieved);
            achieved.remove(&effect);
            seq.pop();
        }
    }
}

fn jaccard(a: &BTreeSet<TemplateId>, b: &BTreeSet<TemplateId>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn instantiate(
    order: &[usize],
    pool: &[(&HypothesisTemplate, f64)],
    diagnosis: &ErrorDiagnosis,
    props: &WordProperties,
    knowledge: &Knowledge,
    targets: &[Category],
) -> InquiryTrace {
    let steps: Vec<TraceStep> = order
        .iter()
        .map(|&i| {
            let (t, confidence) = pool[i];
            let evidence = bind_evidence(t, props, &diagnosis.features);
            let params = t
                .warrant
                .params
                .iter()
                .map(|p| {
                    let key = p.to_string();
                    let v = evidence.get(&key).cloned().unwrap_or(serde_json::Value::Null);
                    (key, v)
                })
                .collect();
            TraceStep {
                template: t.id,
                confidence,
                evidence,
                warrant: Warrant { operator: t.warrant.operator.clone(), params },
            }
        })
        .collect();
    let achieved_effects: Vec<LearningEffect> = order.iter().map(|&i| pool[i].0.effect).collect();
    let chain: Vec<String> = order
        .iter()
        .map(|&i| format!("{} {}", pool[i].0.id, pool[i].0.action.as_str()))
        .collect();
    let closing: Vec<String> = targets
        .iter()
        .map(|c| {
            let by: Vec<&str> = achieved_effects
                .iter()
                .filter(|e| knowledge.taxonomy.resolves(**e, *c))
                .map(|e| e.as_str())
                .collect();
            format!("{} resolved by {}", c.as_str(), by.join(", "))
        })
        .collect();
    let rationale = format!(
        "Likely cause: {} ({}). Steps: {}. Closure: {}.",
        targets.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", "),
        targets
            .iter()
            .map(|c| knowledge.taxonomy.descriptor(*c))
            .collect::<Vec<_>>()
            .join("; "),
        chain.join(" -> "),
        closing.join("; ")
    );
    InquiryTrace { steps, rationale, achieved_effects }
}

/// All legal closing traces, best first: higher summed confidence, then
/// fewer steps, then the smaller id sequence.
pub fn enumerate(
    applicable: &[Applicable],
    diagnosis: &ErrorDiagnosis,
    props: &WordProperties,
    knowledge: &Knowledge,
    config: &PlannerConfig,
) -> Vec<InquiryTrace> {
    let mut pool: Vec<(&HypothesisTemplate, f64)> = applicable
        .iter()
        .filter(|a| a.confidence > 0.0)
        .map(|a| (knowledge.templates.get(a.template), a.confidence))
        .collect();
    pool.sort_by_key(|(t, _)| t.id);
    pool.dedup_by_key(|(t, _)| t.id);
    let targets = diagnosis.rank_one();
    let mut search = Search {
        pool,
        taxonomy: &knowledge.taxonomy,
        targets: targets.clone(),
        config,
        found: BTreeMap::new(),
    };
    if !search.targets.is_empty() {
        search.dfs(&mut Vec::new(), &mut BTreeSet::new());
    }
    let pool = &search.pool;
    let mut orders: Vec<(f64, Vec<TemplateId>, &Vec<usize>)> = search
        .found
        .values()
        .map(|o| {
            let sum: f64 = o.iter().map(|&i| pool[i].1).sum();
            (sum, o.iter().map(|&i| pool[i].0.id).collect(), o)
        })
        .collect();
    orders.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.len().cmp(&b.1.len()))
            .then_with(|| a.1.cmp(&b.1))
    });
    orders
        .into_iter()
        .map(|(_, _, o)| instantiate(o, pool, diagnosis, props, knowledge, &targets))
        .collect()
}

/// Greedy top-k under the pairwise Jaccard diversity bound.
pub fn diverse_top(ranked: Vec<InquiryTrace>, config: &PlannerConfig) -> Vec<InquiryTrace> {
    let mut chosen: Vec<(BTreeSet<TemplateId>, InquiryTrace)> = Vec::new();
    for t in ranked {
        if chosen.len() == config.candidate_traces {
            break;
        }
        let set: BTreeSet<TemplateId> = t.ids().into_iter().collect();
        if chosen.iter().all(|(s, _)| jaccard(s, &set) <= config.max_jaccard) {
            chosen.push((set, t));
        }
    }
    chosen.into_iter().map(|(_, t)| t).collect()
}

/// The offline generator's answer for one parallel instance.
pub fn candidate(
    instance: usize,
    applicable: &[Applicable],
    diagnosis: &ErrorDiagnosis,
    props: &WordProperties,
    knowledge: &Knowledge,
    config: &PlannerConfig,
) -> Option<InquiryTrace> {
    diverse_top(enumerate(applicable, diagnosis, props, knowledge, config), config)
        .into_iter()
        .nth(instance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: &[u8]) -> BTreeSet<TemplateId> {
        n.iter().map(|&i| TemplateId::new(i).unwrap()).collect()
    }

    #[test]
    fn jaccard_values() {
        assert_eq!(jaccard(&ids(&[1, 8, 10]), &ids(&[1, 8, 10])), 1.0);
        assert_eq!(jaccard(&ids(&[1, 8]), &ids(&[1, 10])), 1.0 / 3.0);
        assert_eq!(jaccard(&ids(&[1, 3, 8, 10]), &ids(&[1, 3, 8, 10, 14])), 0.8);
    }
}
