//! Dialogue-act ontology: declared intents, slots and speaker roles.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::is_token;
use crate::error::OntologyError;

/// Which party may produce an intent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerRole {
    System,
    Customer,
    Both,
}

/// The party producing a dialogue act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    System,
    Customer,
}

impl SpeakerRole {
    pub fn admits(self, speaker: Speaker) -> bool {
        match self {
            SpeakerRole::Both => true,
            SpeakerRole::System => speaker == Speaker::System,
            SpeakerRole::Customer => speaker == Speaker::Customer,
        }
    }
}

impl std::fmt::Display for Speaker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Speaker::System => "system",
            Speaker::Customer => "customer",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    String,
    Categorical,
}

fn default_max_slots() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentDef {
    pub name: String,
    pub speaker: SpeakerRole,
    #[serde(default)]
    pub allowed_slots: Vec<String>,
    #[serde(default = "default_max_slots")]
    pub max_slots_per_da: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDef {
    pub name: String,
    pub value_type: ValueType,
    #[serde(default)]
    pub allowed_values: Vec<String>,
    #[serde(default)]
    pub description: String,
}

impl SlotDef {
    pub fn is_categorical(&self) -> bool {
        self.value_type == ValueType::Categorical
    }

    pub fn allows(&self, value: &str) -> bool {
        match self.value_type {
            ValueType::String => true,
            ValueType::Categorical => self.allowed_values.iter().any(|v| v == value),
        }
    }
}

/// On-disk layout of an ontology document. Extension documents may omit
/// `name` and `version`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OntologyDoc {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub version: Option<String>,
    #[serde(default)]
    pub intents: Vec<IntentDef>,
    #[serde(default)]
    pub slots: Vec<SlotDef>,
}

/// A validated ontology. Read-only after construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ontology {
    name: String,
    version: String,
    intents: Vec<IntentDef>,
    slots: Vec<SlotDef>,
    #[serde(skip)]
    intent_index: HashMap<String, usize>,
    #[serde(skip)]
    slot_index: HashMap<String, usize>,
}

impl Ontology {
    pub fn from_doc(doc: OntologyDoc) -> Result<Self, OntologyError> {
        let mut ontology = Ontology {
            name: doc.name.unwrap_or_else(|| "unnamed".to_string()),
            version: doc.version.unwrap_or_else(|| "0".to_string()),
            intents: Vec::new(),
            slots: Vec::new(),
            intent_index: HashMap::new(),
            slot_index: HashMap::new(),
        };
        ontology.merge(doc.intents, doc.slots, false)?;
        Ok(ontology)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, OntologyError> {
        let doc: OntologyDoc =
            toml::from_str(text).map_err(|e| OntologyError::Format(e.to_string()))?;
        Self::from_doc(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OntologyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| OntologyError::Io(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    /// Loads a base document followed by any number of extension documents.
    pub fn load_layered<P: AsRef<Path>>(paths: &[P]) -> Result<Self, OntologyError> {
        let (first, rest) = paths
            .split_first()
            .ok_or_else(|| OntologyError::Format("no ontology files given".into()))?;
        let mut ontology = Self::load(first)?;
        for path in rest {
            let path = path.as_ref();
            let text = std::fs::read_to_string(path)
                .map_err(|e| OntologyError::Io(path.display().to_string(), e.to_string()))?;
            let doc: OntologyDoc =
                toml::from_str(&text).map_err(|e| OntologyError::Format(e.to_string()))?;
            ontology.extend(doc)?;
        }
        Ok(ontology)
    }

    /// Merges an extension document. New slots are appended; an intent that
    /// already exists gains the extension's allowed slots (its speaker must
    /// match), a new intent is appended.
    pub fn extend(&mut self, doc: OntologyDoc) -> Result<(), OntologyError> {
        self.merge(doc.intents, doc.slots, true)
    }

    fn merge(
        &mut self,
        intents: Vec<IntentDef>,
        slots: Vec<SlotDef>,
        allow_intent_merge: bool,
    ) -> Result<(), OntologyError> {
        let mut next = self.clone();
        for slot in slots {
            if !is_token(&slot.name) {
                return Err(OntologyError::BadName(slot.name));
            }
            if next.slot_index.contains_key(&slot.name) {
                return Err(OntologyError::DuplicateSlot(slot.name));
            }
            match slot.value_type {
                ValueType::Categorical if slot.allowed_values.is_empty() => {
                    return Err(OntologyError::EmptyCategorical(slot.name));
                }
                ValueType::String if !slot.allowed_values.is_empty() => {
                    return Err(OntologyError::ValuesOnStringSlot(slot.name));
                }
                _ => {}
            }
            let mut seen = HashSet::new();
            for value in &slot.allowed_values {
                if !seen.insert(value.as_str()) {
                    return Err(OntologyError::DuplicateValue(slot.name, value.clone()));
                }
                if !super::is_value_text(value) {
                    return Err(OntologyError::BadValue(slot.name, value.clone()));
                }
            }
            next.slot_index.insert(slot.name.clone(), next.slots.len());
            next.slots.push(slot);
        }
        for intent in intents {
            if !is_token(&intent.name) {
                return Err(OntologyError::BadName(intent.name));
            }
            for slot in &intent.allowed_slots {
                if !next.slot_index.contains_key(slot) {
                    return Err(OntologyError::UndeclaredSlot(intent.name, slot.clone()));
                }
            }
            match next.intent_index.get(&intent.name).copied() {
                Some(idx) if allow_intent_merge => {
                    let existing = &mut next.intents[idx];
                    if existing.speaker != intent.speaker {
                        return Err(OntologyError::SpeakerConflict(intent.name));
                    }
                    for slot in intent.allowed_slots {
                        if !existing.allowed_slots.contains(&slot) {
                            existing.allowed_slots.push(slot);
                        }
                    }
                    existing.max_slots_per_da = existing.max_slots_per_da.max(intent.max_slots_per_da);
                }
                Some(_) => return Err(OntologyError::DuplicateIntent(intent.name)),
                None => {
                    let mut intent = intent;
                    let mut seen = HashSet::new();
                    intent.allowed_slots.retain(|s| seen.insert(s.clone()));
                    next.intent_index.insert(intent.name.clone(), next.intents.len());
                    next.intents.push(intent);
                }
            }
        }
        *self = next;
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn intents(&self) -> &[IntentDef] {
        &self.intents
    }

    pub fn slots(&self) -> &[SlotDef] {
        &self.slots
    }

    pub fn intent(&self, name: &str) -> Option<&IntentDef> {
        self.intent_index.get(name).map(|&i| &self.intents[i])
    }

    pub fn slot(&self, name: &str) -> Option<&SlotDef> {
        self.slot_index.get(name).map(|&i| &self.slots[i])
    }

    /// Intents the given speaker may produce, in declaration order.
    pub fn intents_for(&self, speaker: Speaker) -> impl Iterator<Item = &IntentDef> {
        self.intents.iter().filter(move |i| i.speaker.admits(speaker))
    }
}
