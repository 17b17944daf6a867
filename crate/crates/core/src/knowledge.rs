use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::analysis::Taxonomy;
use crate::error::{Error, Result};
use crate::hypothesis::TemplateLibrary;
use crate::linguistics::{AffixInventory, GraphemePhonemeCorpus, Lexicon, SuffixRules};

const LEXICON: &str = include_str!("../data/lexicon.jsonl");
const CORPUS: &str = include_str!("../data/gp_corpus.json");
const TEMPLATES: &str = include_str!("../data/templates.json");
const AFFIXES: &str = include_str!("../data/affixes.json");
const SUFFIXING: &str = include_str!("../data/suffixing_rules.json");
const TAXONOMY: &str = include_str!("../data/error_taxonomy.json");

/// Optional overrides for the bundled data files.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnowledgePaths {
    pub lexicon: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub affixes: Option<PathBuf>,
    pub suffixing_rules: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
}

/// All immutable language and pedagogy data, shared read-only.
#[derive(Debug, Clone)]
pub struct Knowledge {
    pub lexicon: Lexicon,
    pub corpus: GraphemePhonemeCorpus,
    pub templates: TemplateLibrary,
    pub affixes: AffixInventory,
    pub suffixing: SuffixRules,
    pub taxonomy: Taxonomy,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn source(path: &Option<PathBuf>, bundled: &'static str) -> Result<std::borrow::Cow<'static, str>> {
    Ok(match path {
        Some(p) => read(p)?.into(),
        None => bundled.into(),
    })
}

impl Knowledge {
    pub fn bundled() -> Result<Self> {
        Self::load(&KnowledgePaths::default())
    }

    pub fn load(paths: &KnowledgePaths) -> Result<Self> {
        Ok(Self {
            lexicon: Lexicon::from_jsonl(&source(&paths.lexicon, LEXICON)?)?,
            corpus: GraphemePhonemeCorpus::from_json(&source(&paths.corpus, CORPUS)?)?,
            templates: TemplateLibrary::from_json(&source(&paths.templates, TEMPLATES)?)?,
            affixes: AffixInventory::from_json(&source(&paths.affixes, AFFIXES)?)?,
            suffixing: SuffixRules::from_json(&source(&paths.suffixing_rules, SUFFIXING)?)?,
            taxonomy: Taxonomy::from_json(&source(&paths.taxonomy, TAXONOMY)?)?,
        })
    }

    /// Process-wide bundled knowledge.
    pub fn shared() -> &'static Knowledge {
        shared_cell()
    }

    pub fn shared_arc() -> Arc<Knowledge> {
        shared_cell().clone()
    }
}

fn shared_cell() -> &'static Arc<Knowledge> {
    static SHARED: OnceLock<Arc<Knowledge>> = OnceLock::new();
    SHARED.get_or_init(|| Arc::new(Knowledge::bundled().expect("bundled data is valid")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_data_loads() {
        let k = Knowledge::bundled().unwrap();
        assert!(k.lexicon.len() > 100);
        assert_eq!(k.templates.len(), 18);
        assert_eq!(k.taxonomy.categories().count(), 7);
    }

    #[test]
    fn every_lexicon_entry_passes_validation() {
        for e in Knowledge::shared().lexicon.entries() {
            e.validate().unwrap();
        }
    }

    #[test]
    fn every_context_sentence_uses_lexicon_words() {
        let k = Knowledge::shared();
        for e in k.lexicon.entries() {
            for w in crate::detection::tokenize(&e.context_sentence) {
                assert!(k.lexicon.contains(&w.text), "{:?} in {:?}", w.text, e.context_sentence);
            }
        }
    }
}
