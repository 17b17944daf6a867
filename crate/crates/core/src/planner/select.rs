//! Offline trace scoring and selection.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{InquiryTrace, PlannerConfig};

pub const VALIDITY_WEIGHT: f64 = 0.5;
pub const COHERENCE_WEIGHT: f64 = 0.3;
pub const CLARITY_WEIGHT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceScore {
    pub validity: f64,
    pub coherence: f64,
    pub clarity: f64,
    pub total: f64,
}

impl TraceScore {
    pub fn new(validity: f64, coherence: f64, clarity: f64) -> Self {
        Self {
            validity,
            coherence,
            clarity,
            total: VALIDITY_WEIGHT * validity + COHERENCE_WEIGHT * coherence + CLARITY_WEIGHT * clarity,
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("validity", self.validity),
            ("coherence", self.coherence),
            ("clarity", self.clarity),
            ("total", self.total),
        ] {
            if !(0.0..=1.0).contains(&v) {
                out.push(format!("{name} {v} is outside [0,1]"));
            }
        }
        let expect = Self::new(self.validity, self.coherence, self.clarity).total;
        if (expect - self.total).abs() > 1e-9 {
            out.push(format!("total {} is not the weighted sum {expect}", self.total));
        }
        out
    }
}

/// validity: mean step confidence; coherence: share of adjacent steps that
/// use a common evidence field; clarity: 1 at `min_steps`, 0 at `max_steps`.
pub fn score_trace(trace: &InquiryTrace, config: &PlannerConfig) -> TraceScore {
    let n = trace.steps.len();
    let validity = if n == 0 {
        0.0
    } else {
        trace.steps.iter().map(|s| s.confidence).sum::<f64>() / n as f64
    };
    let coherence = if n < 2 {
        1.0
    } else {
        let shared = trace
            .steps
            .windows(2)
            .filter(|w| w[0].evidence.keys().any(|k| w[1].evidence.contains_key(k)))
            .count();
        shared as f64 / (n - 1) as f64
    };
    let span = config.max_steps.saturating_sub(config.min_steps);
    let clarity = if span == 0 {
        1.0
    } else {
        1.0 - n.saturating_sub(config.min_steps).min(span) as f64 / span as f64
    };
    TraceScore::new(validity, coherence, clarity)
}

fn better(a: (&InquiryTrace, &TraceScore), b: (&InquiryTrace, &TraceScore)) -> Ordering {
    b.1.total
        .total_cmp(&a.1.total)
        .then(a.0.len().cmp(&b.0.len()))
        .then_with(|| a.0.ids().cmp(&b.0.ids()))
}

/// Index and score of the best candidate; independent of candidate order.
pub fn select_offline(candidates: &[InquiryTrace], config: &PlannerConfig) -> Option<(usize, TraceScore)> {
    let scores: Vec<TraceScore> = candidates.iter().map(|c| score_trace(c, config)).collect();
    (0..candidates.len())
        .min_by(|&i, &j| better((&candidates[i], &scores[i]), (&candidates[j], &scores[j])))
        .map(|i| (i, scores[i]))
}
