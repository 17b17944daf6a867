//! Deterministic symbolic backend answering every task from bundled data.

use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{Provider, Task};
use crate::analysis::{rank_offline, RankingRequest, RankingResponse};
use crate::detection::{predict_target, PredictionRequest, PredictionWeights};
use crate::error::{Error, Result};
use crate::hypothesis::{DescriptorRequest, DescriptorResponse};
use crate::knowledge::Knowledge;
use crate::linguistics::{analyze_attempt, PropertyRequest, WordProperties};
use crate::planner::search::candidate;
use crate::planner::select::select_offline;
use crate::planner::{SelectionRequest, SelectionResponse, TraceRequest, TraceResponse};
use crate::program::synth::{build_plan, ProgramRequest};
use crate::runtime::verify::{semantic_offline, SemanticRequest};

pub struct OfflineProvider {
    knowledge: Arc<Knowledge>,
    weights: PredictionWeights,
}

impl OfflineProvider {
    pub fn new(knowledge: Arc<Knowledge>) -> Self {
        Self { knowledge, weights: PredictionWeights::default() }
    }

    fn properties(&self, req: PropertyRequest) -> Result<WordProperties> {
        let k = &self.knowledge;
        let word = req.word.trim().to_lowercase();
        let props = match (&req.reference, k.lexicon.get(&word)) {
            (Some(r), _) if r.word == word => r.clone(),
            (Some(r), _) => analyze_attempt(&word, r, &k.corpus, &req.context_sentence),
            (None, Some(entry)) => entry.clone(),
            (None, None) => return Err(Error::UnknownWord(req.word)),
        };
        if req.reference.is_none() {
            props.validate()?;
        }
        Ok(props)
    }

    fn answer(&self, task: Task, request: &serde_json::Value) -> Result<serde_json::Value> {
        let k = &*self.knowledge;
        match task {
            Task::PropertySynthesis => reply(self.properties(parse(task, request)?)?),
            Task::TargetPrediction => {
                let r: PredictionRequest = parse(task, request)?;
                reply(predict_target(&r.attempt, &r.sentence, k, &self.weights))
            }
            Task::ErrorRanking => {
                let r: RankingRequest = parse(task, request)?;
                reply(RankingResponse { ranked_categories: rank_offline(&r.features, r.epsilon) })
            }
            Task::DescriptorScore => {
                let r: DescriptorRequest = parse(task, request)?;
                let confidence = r
                    .ranked_categories
                    .iter()
                    .find(|c| c.category == r.category)
                    .map_or(0.0, |c| c.confidence);
                reply(DescriptorResponse { confidence })
            }
            Task::TraceGeneration => {
                let r: TraceRequest = parse(task, request)?;
                let trace = candidate(r.instance, &r.applicable, &r.diagnosis, &r.props, k, &r.config);
                reply(TraceResponse { trace })
            }
            Task::TraceSelection => {
                let r: SelectionRequest = parse(task, request)?;
                let (index, score) = select_offline(&r.candidates, &r.config)
                    .ok_or_else(|| Error::provider(task.as_str(), "no candidates"))?;
                reply(SelectionResponse { index, score })
            }
            Task::ProgramSynthesis => {
                let r: ProgramRequest = parse(task, request)?;
                reply(build_plan(k, &r))
            }
            Task::SemanticCheck => {
                let r: SemanticRequest = parse(task, request)?;
                reply(semantic_offline(&r))
            }
        }
    }
}

fn parse<T: DeserializeOwned>(task: Task, request: &serde_json::Value) -> Result<T> {
    T::deserialize(request).map_err(|e| Error::provider(task.as_str(), format!("malformed request: {e}")))
}

fn reply<T: Serialize>(value: T) -> Result<serde_json::Value> {
    serde_json::to_value(value).map_err(|e| Error::provider("offline", e.to_string()))
}

impl Provider for OfflineProvider {
    fn complete(&self, task: Task, request: &serde_json::Value) -> Result<serde_json::Value> {
        self.answer(task, request)
    }

    fn backend(&self) -> &'static str {
        "offline"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::ProviderHandle;

    #[test]
    fn unknown_word_is_a_provider_failure() {
        let p = ProviderHandle::offline(Knowledge::shared_arc());
        let err = crate::linguistics::synthesize_properties("zzyzx", "", &p).unwrap_err();
        assert!(err.is_provider_failure());
        assert_eq!(err.to_string(), "unknown word: zzyzx");
    }

    #[test]
    fn malformed_request_is_rejected() {
        let p = ProviderHandle::offline(Knowledge::shared_arc());
        let err = p.complete(Task::ErrorRanking, &serde_json::json!({"nope": 1})).unwrap_err();
        assert!(err.is_provider_failure());
    }
}
