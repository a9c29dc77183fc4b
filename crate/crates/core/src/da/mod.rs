//! Dialogue acts: an intent plus an ordered list of slot-value pairs, the
//! ontology that validates them, and the textual grammar
//! `intent (slot=value, slot=value), intent (...)`.

mod enumerate;
mod grammar;
mod ontology;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use enumerate::{enumerate_das, EnumerateOptions, DEFAULT_CEILING};
pub use grammar::{parse_da_list, parse_das, serialize_da_list};
pub use ontology::{IntentDef, Ontology, OntologyDoc, SlotDef, Speaker, SpeakerRole, ValueType};

/// The one intent whose pairs carry the requested marker.
pub const REQUEST_INTENT: &str = "request";

/// Surface form of the requested marker.
pub const REQUESTED_MARKER: &str = "?";

/// Characters that delimit the grammar and therefore never occur in values.
pub const RESERVED_CHARS: [char; 4] = [',', '(', ')', '='];

pub(crate) fn is_token_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

pub(crate) fn is_token(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_token_char)
}

/// Whether `s` is representable as a concrete value: non-empty, trimmed,
/// free of reserved characters and distinct from the requested marker.
pub fn is_value_text(s: &str) -> bool {
    !s.is_empty()
        && s.trim() == s
        && s != REQUESTED_MARKER
        && !s.contains(RESERVED_CHARS)
}

/// Strips reserved characters and surrounding whitespace so arbitrary text
/// (names, free-text captures) can be carried as a slot value.
pub fn sanitize_value(raw: &str) -> Option<String> {
    let cleaned: String = raw
        .chars()
        .map(|c| if RESERVED_CHARS.contains(&c) { ' ' } else { c })
        .collect();
    let collapsed = cleaned.split_whitespace().collect::<Vec<_>>().join(" ");
    is_value_text(&collapsed).then_some(collapsed)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    /// The `?` marker of a requested slot.
    Requested,
    Text(String),
}

impl Value {
    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Requested => None,
            Value::Text(s) => Some(s),
        }
    }

    pub fn is_requested(&self) -> bool {
        matches!(self, Value::Requested)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Requested => f.write_str(REQUESTED_MARKER),
            Value::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlotValue {
    pub slot: String,
    pub value: Value,
}

impl SlotValue {
    pub fn new(slot: impl Into<String>, value: impl Into<String>) -> Self {
        SlotValue {
            slot: slot.into(),
            value: Value::Text(value.into()),
        }
    }

    pub fn requested(slot: impl Into<String>) -> Self {
        SlotValue {
            slot: slot.into(),
            value: Value::Requested,
        }
    }
}

impl fmt::Display for SlotValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.slot, self.value)
    }
}

impl Serialize for SlotValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SlotValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        let mut das = parse_das(&format!("x ({text})")).map_err(serde::de::Error::custom)?;
        match das.pop() {
            Some(mut da) if das.is_empty() && da.pairs.len() == 1 => Ok(da.pairs.remove(0)),
            _ => Err(serde::de::Error::custom(format!("expected `slot=value`, found `{text}`"))),
        }
    }
}

/// `PartialEq` compares pairs in order; use [`DialogueAct::equivalent`] for
/// the order-insensitive comparison.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DialogueAct {
    pub intent: String,
    pub pairs: Vec<SlotValue>,
}

impl DialogueAct {
    pub fn new(intent: impl Into<String>) -> Self {
        DialogueAct {
            intent: intent.into(),
            pairs: Vec::new(),
        }
    }

    pub fn with(mut self, slot: impl Into<String>, value: impl Into<String>) -> Self {
        self.pairs.push(SlotValue::new(slot, value));
        self
    }

    pub fn with_requested(mut self, slot: impl Into<String>) -> Self {
        self.pairs.push(SlotValue::requested(slot));
        self
    }

    pub fn get(&self, slot: &str) -> Option<&Value> {
        self.pairs.iter().find(|p| p.slot == slot).map(|p| &p.value)
    }

    pub fn text_of(&self, slot: &str) -> Option<&str> {
        self.get(slot).and_then(Value::as_text)
    }

    pub fn slot_names(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.slot.as_str())
    }

    /// Equality with set semantics over the pairs.
    pub fn equivalent(&self, other: &DialogueAct) -> bool {
        if self.intent != other.intent || self.pairs.len() != other.pairs.len() {
            return false;
        }
        let mine: HashSet<&SlotValue> = self.pairs.iter().collect();
        other.pairs.iter().all(|p| mine.contains(p))
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (", self.intent)?;
        for (i, pair) in self.pairs.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{pair}")?;
        }
        f.write_str(")")
    }
}

impl Serialize for DialogueAct {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DialogueAct {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        let mut das = parse_das(&text).map_err(serde::de::Error::custom)?;
        if das.len() != 1 {
            return Err(serde::de::Error::custom(format!(
                "expected exactly one dialogue act, found {}",
                das.len()
            )));
        }
        Ok(das.remove(0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownIntent(String),
    SpeakerMismatch { intent: String, speaker: Speaker },
    UnknownSlot(String),
    SlotNotAllowed { intent: String, slot: String },
    DisallowedValue { slot: String, value: String },
    MalformedValue { slot: String, value: String },
    DuplicateSlot(String),
    RequestedOutsideRequest(String),
    ConcreteValueInRequest(String),
    TooManyPairs { intent: String, max: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownIntent(i) => write!(f, "unknown intent `{i}`"),
            Violation::SpeakerMismatch { intent, speaker } => {
                write!(f, "intent `{intent}` is not available to the {speaker}")
            }
            Violation::UnknownSlot(s) => write!(f, "unknown slot `{s}`"),
            Violation::SlotNotAllowed { intent, slot } => {
                write!(f, "slot `{slot}` is not allowed with `{intent}`")
            }
            Violation::DisallowedValue { slot, value } => {
                write!(f, "`{value}` is not an allowed value of `{slot}`")
            }
            Violation::MalformedValue { slot, value } => {
                write!(f, "value `{value}` of `{slot}` is not representable")
            }
            Violation::DuplicateSlot(s) => write!(f, "slot `{s}` appears twice"),
            Violation::RequestedOutsideRequest(s) => {
                write!(f, "`{s}=?` is only valid under `{REQUEST_INTENT}`")
            }
            Violation::ConcreteValueInRequest(s) => {
                write!(f, "`{REQUEST_INTENT}` needs `{s}=?`, not a concrete value")
            }
            Violation::TooManyPairs { intent, max, found } => {
                write!(f, "`{intent}` takes at most {max} pairs, found {found}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Checks a dialogue act against the ontology and, when `speaker` is given,
/// against the intent's speaker role.
pub fn validate_da(da: &DialogueAct, ontology: &Ontology, speaker: Option<Speaker>) -> ValidationReport {
    let mut violations = Vec::new();
    let Some(intent) = ontology.intent(&da.intent) else {
        violations.push(Violation::UnknownIntent(da.intent.clone()));
        return ValidationReport { violations };
    };
    if let Some(speaker) = speaker {
        if !intent.speaker.admits(speaker) {
            violations.push(Violation::SpeakerMismatch {
                intent: da.intent.clone(),
                speaker,
            });
        }
    }
    if da.pairs.len() > intent.max_slots_per_da {
        violations.push(Violation::TooManyPairs {
            intent: da.intent.clone(),
            max: intent.max_slots_per_da,
            found: da.pairs.len(),
        });
    }
    let is_request = da.intent == REQUEST_INTENT;
    let mut seen = HashSet::new();
    for pair in &da.pairs {
        if !seen.insert(pair.slot.as_str()) {
            violations.push(Violation::DuplicateSlot(pair.slot.clone()));
        }
        let Some(slot) = ontology.slot(&pair.slot) else {
            violations.push(Violation::UnknownSlot(pair.slot.clone()));
            continue;
        };
        if !intent.allowed_slots.iter().any(|s| s == &pair.slot) {
            violations.push(Violation::SlotNotAllowed {
                intent: da.intent.clone(),
                slot: pair.slot.clone(),
            });
        }
        match (&pair.value, is_request) {
            (Value::Requested, true) => {}
            (Value::Requested, false) => {
                violations.push(Violation::RequestedOutsideRequest(pair.slot.clone()))
            }
            (Value::Text(_), true) => {
                violations.push(Violation::ConcreteValueInRequest(pair.slot.clone()))
            }
            (Value::Text(v), false) => {
                if !is_value_text(v) {
                    violations.push(Violation::MalformedValue {
                        slot: pair.slot.clone(),
                        value: v.clone(),
                    });
                } else if !slot.allows(v) {
                    violations.push(Violation::DisallowedValue {
                        slot: pair.slot.clone(),
                        value: v.clone(),
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Validates every act of a list, returning the first failure.
pub fn validate_all(
    das: &[DialogueAct],
    ontology: &Ontology,
    speaker: Option<Speaker>,
) -> Result<(), crate::error::DaError> {
    for (index, da) in das.iter().enumerate() {
        let report = validate_da(da, ontology, speaker);
        if !report.is_empty() {
            return Err(crate::error::DaError::Validation { index, report });
        }
    }
    Ok(())
}
