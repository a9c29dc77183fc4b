//! Customer-side language understanding.
//!
//! [`Nlu::understand`] is deterministic and total: silence and unmatched
//! text both yield an empty act list rather than a guess. An utterance found
//! verbatim (after normalization) in the corpus always returns the corpus
//! acts. [`ExternalNlu`] delegates to a generative model over HTTP and falls
//! back to the lexicon on any failure.

mod external;
mod lexicon;

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use external::{ExternalNlu, ExternalRequest, ExternalResponse};
pub use lexicon::{find_keyword, normalize, EntryMatch, Lexicon, LexiconEntry};

use crate::da::{
    parse_das, sanitize_value, serialize_da_list, validate_all, validate_da, DialogueAct, Ontology,
    Speaker, REQUEST_INTENT,
};
use crate::dst::DialogueState;
use crate::error::NluError;

/// Separator of the generative-model training format `da [SEP] utterance`.
pub const SEP_TOKEN: &str = "[SEP]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NluSource {
    Lexicon,
    ExactCorpus,
    External,
    Fallback,
    /// Acts supplied directly by a simulator script.
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NluHypothesis {
    pub das: Vec<DialogueAct>,
    /// Matched keyword groups (lexicon), act count (corpus), 0 otherwise.
    pub score: u32,
    pub source: NluSource,
}

impl NluHypothesis {
    pub fn fallback() -> Self {
        NluHypothesis {
            das: Vec::new(),
            score: 0,
            source: NluSource::Fallback,
        }
    }

    pub fn scripted(das: Vec<DialogueAct>) -> Self {
        NluHypothesis {
            das,
            score: 0,
            source: NluSource::Scripted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPair {
    pub da_string: String,
    pub utterance: String,
}

impl CorpusPair {
    /// The generative-model training line: `da [SEP] utterance`.
    pub fn training_line(&self) -> String {
        format!("{} {SEP_TOKEN} {}", self.da_string, self.utterance)
    }
}

/// Reads a tab-separated corpus: one `da<TAB>utterance` pair per line.
/// Blank lines and lines starting with `#` are skipped.
pub fn load_corpus(path: impl AsRef<Path>, ontology: &Ontology) -> Result<Vec<CorpusPair>, NluError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| NluError::Io(path.display().to_string(), e.to_string()))?;
    parse_corpus(&text, ontology)
}

pub fn parse_corpus(text: &str, ontology: &Ontology) -> Result<Vec<CorpusPair>, NluError> {
    let mut pairs = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (da_text, utterance) = line.split_once('\t').ok_or_else(|| NluError::Parse {
            line: line_no,
            message: "expected `dialogue act<TAB>utterance`".into(),
        })?;
        let das = parse_das(da_text).map_err(|e| NluError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        validate_all(&das, ontology, Some(Speaker::Customer)).map_err(|e| NluError::Validation {
            line: line_no,
            message: e.to_string(),
        })?;
        let utterance = utterance.trim().to_string();
        if utterance.is_empty() {
            return Err(NluError::Parse {
                line: line_no,
                message: "empty utterance".into(),
            });
        }
        if let Some(first) = seen.insert(normalize(&utterance), line_no) {
            return Err(NluError::Validation {
                line: line_no,
                message: format!("utterance already listed on line {first}"),
            });
        }
        pairs.push(CorpusPair {
            da_string: serialize_da_list(&das),
            utterance,
        });
    }
    Ok(pairs)
}

/// Anything that can turn an utterance into customer acts.
pub trait Understand: Send + Sync {
    fn understand(&self, utterance: &str, state: &DialogueState) -> NluHypothesis;
}

/// Longest answer (in words) taken verbatim for a requested free-text slot.
const FREE_TEXT_MAX_WORDS: usize = 5;

#[derive(Debug, Clone)]
pub struct Nlu {
    ontology: Arc<Ontology>,
    lexicon: Lexicon,
    corpus: HashMap<String, Vec<DialogueAct>>,
}

impl Nlu {
    pub fn new(ontology: Arc<Ontology>, lexicon: Lexicon, corpus: &[CorpusPair]) -> Self {
        let corpus = corpus
            .iter()
            .map(|p| {
                let das = parse_das(&p.da_string).expect("corpus pairs are parsed on load");
                (normalize(&p.utterance), das)
            })
            .collect();
        Nlu {
            ontology,
            lexicon,
            corpus,
        }
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    fn exclusive(a: &str, b: &str) -> bool {
        matches!((a, b), ("affirm", "negate") | ("negate", "affirm"))
    }

    /// Picks a non-conflicting set of fired entries. Higher priority wins a
    /// conflict, then the higher score, then the earlier entry. Two entries
    /// conflict when they bind the same slot, read the same words, or carry
    /// mutually exclusive intents.
    fn select(&self, mut fired: Vec<EntryMatch>) -> Vec<EntryMatch> {
        fired.sort_by(|a, b| {
            b.priority
                .cmp(&a.priority)
                .then(b.score.cmp(&a.score))
                .then(a.entry.cmp(&b.entry))
        });
        let mut accepted: Vec<EntryMatch> = Vec::new();
        for candidate in fired {
            let conflict = accepted.iter().any(|acc| {
                candidate.overlaps(acc)
                    || candidate.das.iter().any(|d| {
                        acc.das.iter().any(|e| {
                            d == e
                                || Self::exclusive(&d.intent, &e.intent)
                                || d.slot_names().any(|s| e.slot_names().any(|t| s == t))
                        })
                    })
            });
            if !conflict {
                accepted.push(candidate);
            }
        }
        accepted.sort_by_key(|m| (m.first_position(), m.entry));
        accepted
    }

    /// Folds acts with the same intent into one act while the intent's pair
    /// limit allows it.
    fn merge(&self, das: Vec<DialogueAct>) -> Vec<DialogueAct> {
        let mut out: Vec<DialogueAct> = Vec::new();
        for da in das {
            let limit = self
                .ontology
                .intent(&da.intent)
                .map_or(0, |i| i.max_slots_per_da);
            let target = out.iter_mut().find(|o| {
                o.intent == da.intent
                    && (da.pairs.is_empty() || o.pairs.len() + da.pairs.len() <= limit)
            });
            match target {
                Some(o) => o.pairs.extend(da.pairs),
                None => out.push(da),
            }
        }
        out.retain(|d| validate_da(d, &self.ontology, Some(Speaker::Customer)).is_empty());
        out
    }

    /// A short unmatched reply to a system question about a free-text slot
    /// is taken as the answer.
    fn free_text_answer(&self, utterance: &str, state: &DialogueState) -> Option<DialogueAct> {
        if utterance.split_whitespace().count() > FREE_TEXT_MAX_WORDS {
            return None;
        }
        let asked = state
            .last_system_das()
            .iter()
            .filter(|d| d.intent == REQUEST_INTENT)
            .flat_map(|d| d.pairs.iter())
            .find(|p| {
                p.value.is_requested()
                    && self
                        .ontology
                        .slot(&p.slot)
                        .is_some_and(|s| !s.is_categorical())
            })?;
        let value = sanitize_value(utterance.trim().trim_end_matches(['.', '!', '?', '。', '！', '？']))?;
        let da = DialogueAct::new("inform").with(asked.slot.clone(), value);
        validate_da(&da, &self.ontology, Some(Speaker::Customer))
            .is_empty()
            .then_some(da)
    }
}

impl Understand for Nlu {
    fn understand(&self, utterance: &str, state: &DialogueState) -> NluHypothesis {
        let normalized = normalize(utterance);
        if normalized.is_empty() {
            return NluHypothesis::fallback();
        }
        if let Some(das) = self.corpus.get(&normalized) {
            return NluHypothesis {
                das: das.clone(),
                score: das.len() as u32,
                source: NluSource::ExactCorpus,
            };
        }
        let selected = self.select(self.lexicon.matches(utterance));
        if !selected.is_empty() {
            let score = selected.iter().map(|m| m.score).sum();
            let das = self.merge(selected.into_iter().flat_map(|m| m.das).collect());
            if !das.is_empty() {
                return NluHypothesis {
                    das,
                    score,
                    source: NluSource::Lexicon,
                };
            }
        }
        if let Some(da) = self.free_text_answer(utterance, state) {
            return NluHypothesis {
                das: vec![da],
                score: 0,
                source: NluSource::Lexicon,
            };
        }
        NluHypothesis::fallback()
    }
}
