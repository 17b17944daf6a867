//! Hypothesis templates: guard, evidence, action, warrant and learning
//! effect for each of the eighteen inquiry moves, loaded from data.

pub mod fields;
pub mod guard;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analysis::{Category, DiagnosticFeatures, ErrorDiagnosis, RankedCategory};
use crate::detection::AttemptContext;
use crate::error::{Error, Result};
use crate::linguistics::WordProperties;
use crate::providers::{ProviderHandle, Task};

pub use fields::Value;
pub use guard::{GuardExpr, GuardParams};

pub const TEMPLATE_COUNT: u8 = 18;

/// `H1` .. `H18`, ordered numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TemplateId(u8);

impl TemplateId {
    pub fn new(n: u8) -> Option<Self> {
        (1..=TEMPLATE_COUNT).contains(&n).then_some(Self(n))
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = TemplateId> {
        (1..=TEMPLATE_COUNT).map(TemplateId)
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H{}", self.0)
    }
}

impl FromStr for TemplateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.strip_prefix('H')
            .and_then(|n| n.parse().ok())
            .and_then(TemplateId::new)
            .ok_or_else(|| Error::Schema(format!("invalid template id {s:?}")))
    }
}

impl Serialize for TemplateId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TemplateId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! snake_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident = $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

snake_enum!(
    /// What an inquiry step asks the learner to think about.
    QuestionType {
        Meaning = "meaning",
        Structure = "structure",
        Gpc = "gpc",
        Relatives = "relatives",
    }
);

snake_enum!(ActionBase {
    DefineMeaning = "define_meaning",
    BoxBase = "box_base",
    Decompose = "decompose",
    WordSum = "word_sum",
    InspectSuffixRule = "inspect_suffix_rule",
    BuildMatrix = "build_matrix",
    SegmentAloud = "segment_aloud",
    IdentifyGraphemes = "identify_graphemes",
    TraceOrigin = "trace_origin",
    SortInOut = "sort_in_out",
    VerifyMorphemes = "verify_morphemes",
    CompareCousins = "compare_cousins",
    ContrastLookalikes = "contrast_lookalikes",
    MapPhonemes = "map_phonemes",
    CompareRelativesSound = "compare_relatives_sound",
    CompareFamilySpelling = "compare_family_spelling",
    SortByMeaning = "sort_by_meaning",
    VisualContrast = "visual_contrast",
});

snake_enum!(LearningEffect {
    MeaningAligned = "meaning_aligned",
    BaseAnchored = "base_anchored",
    StructureUnderstood = "structure_understood",
    WordSumBuilt = "word_sum_built",
    RuleInduced = "rule_induced",
    FamilyGeneralized = "family_generalized",
    BoundariesRestored = "boundaries_restored",
    GpcAligned = "gpc_aligned",
    OriginRationale = "origin_rationale",
    FamilyReinforced = "family_reinforced",
    MorphemesConfirmed = "morphemes_confirmed",
    CousinsExplained = "cousins_explained",
    FalseRelativesExcluded = "false_relatives_excluded",
    SoundMapAligned = "sound_map_aligned",
    StableDespiteSoundChange = "stable_despite_sound_change",
    PatternConsistent = "pattern_consistent",
    HomophoneDistinguished = "homophone_distinguished",
    FormDifferenceNoticed = "form_difference_noticed",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EvidenceSource {
    Props,
    Features,
}

/// Typed reference such as `props.graphemes` or `features.phoneme_match`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EvidenceRef {
    pub source: EvidenceSource,
    pub field: String,
}

impl fmt::Display for EvidenceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let src = match self.source {
            EvidenceSource::Props => "props",
            EvidenceSource::Features => "features",
        };
        write!(f, "{src}.{}", self.field)
    }
}

impl FromStr for EvidenceRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (src, field) = s
            .split_once('.')
            .ok_or_else(|| Error::Schema(format!("evidence {s:?} must be props.<field> or features.<field>")))?;
        let (source, known) = match src {
            "props" => (EvidenceSource::Props, fields::PROPERTY_FIELDS),
            "features" => (EvidenceSource::Features, fields::FEATURE_FIELDS),
            _ => return Err(Error::Schema(format!("evidence {s:?} has unknown source {src:?}"))),
        };
        if !known.contains(&field) {
            return Err(Error::Schema(format!("evidence references unknown field {s:?}")));
        }
        Ok(Self {
            source,
            field: field.to_string(),
        })
    }
}

impl EvidenceRef {
    /// Current value of the referenced field.
    pub fn bind(&self, props: &WordProperties, features: &DiagnosticFeatures) -> serde_json::Value {
        let whole = match self.source {
            EvidenceSource::Props => serde_json::to_value(props),
            EvidenceSource::Features => serde_json::to_value(features),
        }
        .expect("records serialize");
        whole.get(&self.field).cloned().unwrap_or(serde_json::Value::Null)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarrantSpec {
    pub operator: String,
    pub params: Vec<EvidenceRef>,
}

/// One inquiry move.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisTemplate {
    pub id: TemplateId,
    pub name: String,
    pub question_type: QuestionType,
    pub category: Category,
    pub optional: bool,
    /// Abbreviated precondition as tabulated; informational only.
    pub table_precondition: String,
    pub guard: GuardExpr,
    pub descriptor: String,
    pub evidence: Vec<EvidenceRef>,
    pub action: ActionBase,
    pub warrant: WarrantSpec,
    pub effect: LearningEffect,
    pub effect_preconditions: BTreeSet<LearningEffect>,
    pub prompt: String,
    pub feedback_true: String,
    pub feedback_false: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WarrantDef {
    operator: String,
    params: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateDef {
    id: TemplateId,
    name: String,
    question_type: QuestionType,
    category: Category,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    optional: bool,
    table_precondition: String,
    guard: String,
    descriptor: String,
    evidence: Vec<String>,
    action: ActionBase,
    warrant: WarrantDef,
    effect: LearningEffect,
    effect_preconditions: Vec<LearningEffect>,
    prompt: String,
    feedback_true: String,
    feedback_false: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    version: u32,
    templates: Vec<TemplateDef>,
}

impl TemplateDef {
    fn compile(self) -> Result<HypothesisTemplate> {
        let ctx = |e: Error| Error::Schema(format!("{}: {}", self.id, e.to_string().trim_start_matches("schema error: ")));
        let guard = guard::parse(&self.guard).map_err(ctx)?;
        let evidence = self
            .evidence
            .iter()
            .map(|s| s.parse::<EvidenceRef>())
            .collect::<Result<Vec<_>>>()
            .map_err(ctx)?;
        let params = self
            .warrant
            .params
            .iter()
            .map(|s| s.parse::<EvidenceRef>())
            .collect::<Result<Vec<_>>>()
            .map_err(ctx)?;
        if let Some(p) = params.iter().find(|p| !evidence.contains(p)) {
            return Err(Error::Schema(format!("{}: warrant parameter {p} is not bound as evidence", self.id)));
        }
        Ok(HypothesisTemplate {
            id: self.id,
            name: self.name,
            question_type: self.question_type,
            category: self.category,
            optional: self.optional,
            table_precondition: self.table_precondition,
            guard,
            descriptor: self.descriptor,
            evidence,
            action: self.action,
            warrant: WarrantSpec {
                operator: self.warrant.operator,
                params,
            },
            effect: self.effect,
            effect_preconditions: self.effect_preconditions.into_iter().collect(),
            prompt: self.prompt,
            feedback_true: self.feedback_true,
            feedback_false: self.feedback_false,
        })
    }
}

impl From<&HypothesisTemplate> for TemplateDef {
    fn from(t: &HypothesisTemplate) -> Self {
        Self {
            id: t.id,
            name: t.name.clone(),
            question_type: t.question_type,
            category: t.category,
            optional: t.optional,
            table_precondition: t.table_precondition.clone(),
            guard: t.guard.to_string(),
            descriptor: t.descriptor.clone(),
            evidence: t.evidence.iter().map(ToString::to_string).collect(),
            action: t.action,
            warrant: WarrantDef {
                operator: t.warrant.operator.clone(),
                params: t.warrant.params.iter().map(ToString::to_string).collect(),
            },
            effect: t.effect,
            effect_preconditions: t.effect_preconditions.iter().copied().collect(),
            prompt: t.prompt.clone(),
            feedback_true: t.feedback_true.clone(),
            feedback_false: t.feedback_false.clone(),
        }
    }
}

/// The eighteen templates, indexed by id.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateLibrary {
    version: u32,
    templates: Vec<HypothesisTemplate>,
}

impl TemplateLibrary {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: TemplateFile = crate::codec::from_json_str(text).map_err(|e| match e {
            Error::Parse { location, message } => Error::Schema(format!("{location}: {message}")),
            other => other,
        })?;
        let mut seen = BTreeSet::new();
        let mut effects = BTreeSet::new();
        let mut templates = Vec::with_capacity(file.templates.len());
        for def in file.templates {
            if !seen.insert(def.id) {
                return Err(Error::DuplicateId(def.id.to_string()));
            }
            if !effects.insert(def.effect) {
                return Err(Error::Schema(format!("{}: effect {} already used", def.id, def.effect)));
            }
            templates.push(def.compile()?);
        }
        if let Some(missing) = TemplateId::all().find(|id| !seen.contains(id)) {
            return Err(Error::MissingId(missing.to_string()));
        }
        templates.sort_by_key(|t| t.id);
        Ok(Self {
            version: file.version,
            templates,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        crate::codec::canonical_pretty(&TemplateFile {
            version: self.version,
            templates: self.templates.iter().map(TemplateDef::from).collect(),
        })
    }

    pub fn get(&self, id: TemplateId) -> &HypothesisTemplate {
        &self.templates[id.number() as usize - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = &HypothesisTemplate> {
        self.templates.iter()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Template whose step achieves `effect`.
    pub fn producer(&self, effect: LearningEffect) -> Option<&HypothesisTemplate> {
        self.templates.iter().find(|t| t.effect == effect)
    }
}

/// Pure guard evaluation; no provider involved.
pub fn evaluate_guard(
    template: &HypothesisTemplate,
    features: &DiagnosticFeatures,
    props: &WordProperties,
    params: &GuardParams,
) -> bool {
    guard::eval(
        &template.guard,
        &|name| fields::field_value(name, features, props),
        params,
    )
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct DescriptorRequest {
    pub template: TemplateId,
    pub descriptor: String,
    pub category: Category,
    pub ranked_categories: Vec<RankedCategory>,
    pub attempt: String,
    pub target: String,
    pub sentence: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct DescriptorResponse {
    pub confidence: f64,
}

/// Soft confidence that the template's descriptor fits this attempt.
pub fn score_descriptor(
    template: &HypothesisTemplate,
    diagnosis: &ErrorDiagnosis,
    context: &AttemptContext,
    provider: &ProviderHandle,
) -> Result<f64> {
    let resp: DescriptorResponse = provider.call(
        Task::DescriptorScore,
        &DescriptorRequest {
            template: template.id,
            descriptor: template.descriptor.clone(),
            category: template.category,
            ranked_categories: diagnosis.ranked_categories.clone(),
            attempt: context.attempt.clone(),
            target: context.target.clone(),
            sentence: context.sentence.clone(),
        },
    )?;
    Ok(resp.confidence)
}

/// Bound evidence values for a template, keyed by reference.
pub fn bind_evidence(
    template: &HypothesisTemplate,
    props: &WordProperties,
    features: &DiagnosticFeatures,
) -> BTreeMap<String, serde_json::Value> {
    template
        .evidence
        .iter()
        .map(|e| (e.to_string(), e.bind(props, features)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUNDLED: &str = include_str!("../../data/templates.json");

    #[test]
    fn bundled_loads_eighteen() {
        let lib = TemplateLibrary::from_json(BUNDLED).unwrap();
        assert_eq!(lib.len(), 18);
        let ids: Vec<String> = lib.iter().map(|t| t.id.to_string()).collect();
        assert_eq!(ids.first().unwrap(), "H1");
        assert_eq!(ids.last().unwrap(), "H18");
    }

    #[test]
    fn round_trip() {
        let lib = TemplateLibrary::from_json(BUNDLED).unwrap();
        let again = TemplateLibrary::from_json(&lib.to_json()).unwrap();
        assert_eq!(lib, again);
    }

    fn edited(f: impl FnOnce(&mut serde_json::Value)) -> String {
        let mut v: serde_json::Value = serde_json::from_str(BUNDLED).unwrap();
        f(&mut v);
        v.to_string()
    }

    #[test]
    fn missing_template_is_reported() {
        let text = edited(|v| {
            v["templates"].as_array_mut().unwrap().retain(|t| t["id"] != "H7");
        });
        assert!(matches!(TemplateLibrary::from_json(&text), Err(Error::MissingId(id)) if id == "H7"));
    }

    #[test]
    fn duplicate_template_is_reported() {
        let text = edited(|v| {
            let first = v["templates"][0].clone();
            v["templates"].as_array_mut().unwrap().push(first);
        });
        assert!(matches!(TemplateLibrary::from_json(&text), Err(Error::DuplicateId(id)) if id == "H1"));
    }

    #[test]
    fn unknown_guard_field_is_named() {
        let text = edited(|v| {
            v["templates"][7]["guard"] = "phonem_match <= $epsilon".into();
        });
        let err = TemplateLibrary::from_json(&text).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
        assert!(err.to_string().contains("phonem_match"), "{err}");
    }

    #[test]
    fn warrant_must_use_bound_evidence() {
        let text = edited(|v| {
            v["templates"][0]["warrant"]["params"] = serde_json::json!(["props.graphemes"]);
        });
        assert!(TemplateLibrary::from_json(&text).is_err());
    }

    #[test]
    fn malformed_file_is_a_schema_error() {
        assert!(matches!(TemplateLibrary::from_json("{\"version\":1}"), Err(Error::Schema(_))));
    }
}
