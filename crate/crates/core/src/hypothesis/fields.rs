//! Fields visible to guards, drawn from diagnostic features and the target
//! word's properties.

use crate::analysis::DiagnosticFeatures;
use crate::linguistics::WordProperties;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Num(f64),
    Sym(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldType {
    Bool,
    Num,
    Sym(&'static [&'static str]),
}

const TRI: &[&str] = &["yes", "no", "unknown"];

pub const FIELDS: &[(&str, FieldType)] = &[
    ("prefix_error", FieldType::Bool),
    ("suffix_error", FieldType::Bool),
    ("segmentation_error", FieldType::Bool),
    ("suffixing_change_applies", FieldType::Bool),
    ("morpheme_boundaries_preserved", FieldType::Bool),
    ("homophone_confusion", FieldType::Bool),
    ("visual_similarity_only", FieldType::Bool),
    ("base_error", FieldType::Bool),
    ("has_error", FieldType::Bool),
    ("phoneme_match", FieldType::Num),
    ("phoneme_distance", FieldType::Num),
    ("grapheme_mismatch_count", FieldType::Num),
    ("etymology_available", FieldType::Bool),
    ("silent_letter", FieldType::Bool),
    ("semantic_appropriateness", FieldType::Bool),
    ("syntactic_correctness", FieldType::Bool),
    ("meaning_understood", FieldType::Sym(TRI)),
    ("affix_count", FieldType::Num),
    ("prefix_count", FieldType::Num),
    ("suffix_count", FieldType::Num),
    ("base_count", FieldType::Num),
    ("morpheme_count", FieldType::Num),
    ("relative_count", FieldType::Num),
    ("homophone_count", FieldType::Num),
];

pub fn field_type(name: &str) -> Option<FieldType> {
    FIELDS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn field_value(name: &str, f: &DiagnosticFeatures, p: &WordProperties) -> Option<Value> {
    use Value::*;
    let n = |x: usize| Num(x as f64);
    Some(match name {
        "prefix_error" => Bool(f.prefix_error),
        "suffix_error" => Bool(f.suffix_error),
        "segmentation_error" => Bool(f.segmentation_error),
        "suffixing_change_applies" => Bool(f.suffixing_change_applies),
        "morpheme_boundaries_preserved" => Bool(f.morpheme_boundaries_preserved),
        "homophone_confusion" => Bool(f.homophone_confusion),
        "visual_similarity_only" => Bool(f.visual_similarity_only),
        "base_error" => Bool(f.base_error),
        "has_error" => Bool(f.has_error()),
        "phoneme_match" => Num(f.phoneme_match),
        "phoneme_distance" => Num(f.phoneme_distance()),
        "grapheme_mismatch_count" => Num(f.grapheme_mismatch_count as f64),
        "etymology_available" => Bool(p.etymology.is_some()),
        "silent_letter" => Bool(p.has_silent_letter()),
        "semantic_appropriateness" => Bool(p.semantic_appropriateness),
        "syntactic_correctness" => Bool(p.syntactic_correctness),
        "meaning_understood" => Sym(p.meaning_understood.as_str().to_string()),
        "affix_count" => n(p.affix_count()),
        "prefix_count" => n(p.prefixes.len()),
        "suffix_count" => n(p.suffixes.len()),
        "base_count" => n(p.bases.len()),
        "morpheme_count" => n(p.morphemes.len()),
        "relative_count" => n(p.family().len()),
        "homophone_count" => n(p.homophones.len()),
        _ => return None,
    })
}

/// The full `(field, value)` tuple set for one attempt.
pub fn facts(f: &DiagnosticFeatures, p: &WordProperties) -> Vec<(&'static str, Value)> {
    FIELDS
        .iter()
        .map(|(name, _)| (*name, field_value(name, f, p).expect("listed field")))
        .collect()
}

/// Property fields evidence may reference as `props.<name>`.
pub const PROPERTY_FIELDS: &[&str] = &[
    "word",
    "morphemes",
    "bases",
    "prefixes",
    "suffixes",
    "graphemes",
    "phonemes",
    "related_words",
    "etymology",
    "homophones",
    "semantic_appropriateness",
    "syntactic_correctness",
    "meaning_understood",
    "context_sentence",
];

/// Feature fields evidence may reference as `features.<name>`.
pub const FEATURE_FIELDS: &[&str] = &[
    "prefix_error",
    "suffix_error",
    "segmentation_error",
    "suffixing_change_applies",
    "phoneme_match",
    "grapheme_mismatch_count",
    "morpheme_boundaries_preserved",
    "homophone_confusion",
    "visual_similarity_only",
    "base_error",
];
