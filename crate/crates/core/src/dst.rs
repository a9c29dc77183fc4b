//! Rule-based dialogue state tracking.
//!
//! [`DialogueState`] is an immutable value: [`Tracker::update`] and
//! [`Tracker::note_system_turn`] return a new state and leave their input
//! untouched, so a session is a lineage of states.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::da::{DialogueAct, Ontology, SlotValue, Speaker, Value};
use crate::error::StateError;

pub const ATTRACTION_NAME: &str = "attraction_name";

/// Stages of the scripted dialogue flow, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FlowPhase {
    Greeting,
    ProfileGathering,
    AttractionIntroduction,
    Recommendation,
    QuestionAnswering,
    Farewell,
    Done,
}

impl FlowPhase {
    pub const ALL: [FlowPhase; 7] = [
        FlowPhase::Greeting,
        FlowPhase::ProfileGathering,
        FlowPhase::AttractionIntroduction,
        FlowPhase::Recommendation,
        FlowPhase::QuestionAnswering,
        FlowPhase::Farewell,
        FlowPhase::Done,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Transitions only move forward; staying put is how the profile and
    /// question-answering steps loop.
    pub fn can_advance_to(self, next: FlowPhase) -> bool {
        next >= self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub speaker: Speaker,
    pub das: Vec<DialogueAct>,
    pub utterance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfirmationOutcome {
    pub act: DialogueAct,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueState {
    pub profile: BTreeMap<String, String>,
    pub belief: BTreeMap<String, String>,
    pub focused_attraction: Option<String>,
    pub pending_request: Option<Vec<SlotValue>>,
    pub pending_confirmation: Option<DialogueAct>,
    /// Confirmation resolved by the most recent customer turn, if any.
    pub confirmation: Option<ConfirmationOutcome>,
    pub recommendation_rejected: bool,
    pub farewell_requested: bool,
    pub history: Vec<HistoryEntry>,
    pub phase: FlowPhase,
    pub turn_count: u32,
    pub silence_streak: u32,
}

impl DialogueState {
    /// A filled slot from either the profile or the belief state.
    pub fn known(&self, slot: &str) -> Option<&str> {
        self.profile
            .get(slot)
            .or_else(|| self.belief.get(slot))
            .map(String::as_str)
    }

    pub fn last_entry(&self, speaker: Speaker) -> Option<&HistoryEntry> {
        self.history.iter().rev().find(|e| e.speaker == speaker)
    }

    /// Acts of the latest customer turn (empty for silence or no turn yet).
    pub fn last_customer_das(&self) -> &[DialogueAct] {
        self.last_entry(Speaker::Customer).map_or(&[], |e| &e.das)
    }

    pub fn last_system_das(&self) -> &[DialogueAct] {
        self.last_entry(Speaker::System).map_or(&[], |e| &e.das)
    }

    /// All system acts emitted so far, oldest first.
    pub fn system_acts(&self) -> impl Iterator<Item = &DialogueAct> {
        self.history
            .iter()
            .filter(|e| e.speaker == Speaker::System)
            .flat_map(|e| e.das.iter())
    }

    pub fn with_phase(&self, next: FlowPhase) -> Result<DialogueState, StateError> {
        if !self.phase.can_advance_to(next) {
            return Err(StateError::PhaseTransition {
                from: self.phase,
                to: next,
            });
        }
        let mut state = self.clone();
        state.phase = next;
        Ok(state)
    }

    /// JSON snapshot served by the state-inspection endpoint.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("state is always representable as JSON")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// `user_*` slots that describe the customer rather than a preference;
    /// they go to the profile, every other `user_*` slot to the belief state.
    pub profile_slots: Vec<String>,
    /// Attraction names that may become the focus. Empty accepts any name.
    pub known_attractions: Vec<String>,
    pub preset_profile: BTreeMap<String, String>,
    pub preset_belief: BTreeMap<String, String>,
}

impl TrackerConfig {
    pub fn standard() -> Self {
        TrackerConfig {
            profile_slots: vec!["user_name".to_string()],
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tracker {
    ontology: Arc<Ontology>,
    config: TrackerConfig,
}

impl Tracker {
    pub fn new(ontology: Arc<Ontology>, config: TrackerConfig) -> Self {
        Tracker { ontology, config }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn new_state(&self) -> DialogueState {
        DialogueState {
            profile: self.config.preset_profile.clone(),
            belief: self.config.preset_belief.clone(),
            focused_attraction: None,
            pending_request: None,
            pending_confirmation: None,
            confirmation: None,
            recommendation_rejected: false,
            farewell_requested: false,
            history: Vec::new(),
            phase: FlowPhase::Greeting,
            turn_count: 0,
            silence_streak: 0,
        }
    }

    fn check_speaker(&self, das: &[DialogueAct], speaker: Speaker) -> Result<(), StateError> {
        for da in das {
            let admitted = self
                .ontology
                .intent(&da.intent)
                .is_some_and(|i| i.speaker.admits(speaker));
            if !admitted {
                return Err(StateError::WrongSpeaker {
                    intent: da.intent.clone(),
                    speaker,
                });
            }
        }
        Ok(())
    }

    fn track_focus(&self, state: &mut DialogueState, das: &[DialogueAct]) {
        for da in das {
            if let Some(name) = da.text_of(ATTRACTION_NAME) {
                if self.config.known_attractions.is_empty()
                    || self.config.known_attractions.iter().any(|a| a == name)
                {
                    state.focused_attraction = Some(name.to_string());
                }
            }
        }
    }

    /// Incorporates one customer turn. An empty act list is silence.
    pub fn update(
        &self,
        state: &DialogueState,
        das: &[DialogueAct],
        utterance: &str,
    ) -> Result<DialogueState, StateError> {
        self.check_speaker(das, Speaker::Customer)?;
        let mut next = state.clone();
        next.turn_count += 1;
        next.confirmation = None;
        if das.is_empty() {
            next.silence_streak += 1;
        } else {
            next.silence_streak = 0;
        }
        let recommended_last = state
            .last_system_das()
            .iter()
            .any(|d| d.intent == "recommend_target");

        let mut requested: Vec<SlotValue> = Vec::new();
        for da in das {
            match da.intent.as_str() {
                "inform" => {
                    for pair in &da.pairs {
                        let Value::Text(value) = &pair.value else { continue };
                        if !pair.slot.starts_with("user_") {
                            continue;
                        }
                        let target = if self.config.profile_slots.contains(&pair.slot) {
                            &mut next.profile
                        } else {
                            &mut next.belief
                        };
                        target.insert(pair.slot.clone(), value.clone());
                    }
                }
                "request" => {
                    for pair in da.pairs.iter().filter(|p| p.value.is_requested()) {
                        if !requested.iter().any(|r| r.slot == pair.slot) {
                            requested.push(pair.clone());
                        }
                    }
                }
                "affirm" | "negate" => {
                    let accepted = da.intent == "affirm";
                    if let Some(act) = next.pending_confirmation.take() {
                        next.confirmation = Some(ConfirmationOutcome { act, accepted });
                    } else if !accepted && recommended_last {
                        next.recommendation_rejected = true;
                    }
                }
                "goodbye" => next.farewell_requested = true,
                _ => {}
            }
        }
        if !requested.is_empty() {
            next.pending_request = Some(requested);
        }
        self.track_focus(&mut next, das);
        next.history.push(HistoryEntry {
            speaker: Speaker::Customer,
            das: das.to_vec(),
            utterance: utterance.to_string(),
        });
        Ok(next)
    }

    /// Records the system's own turn.
    pub fn note_system_turn(
        &self,
        state: &DialogueState,
        das: &[DialogueAct],
        utterance: &str,
    ) -> Result<DialogueState, StateError> {
        self.check_speaker(das, Speaker::System)?;
        let mut next = state.clone();
        self.track_focus(&mut next, das);
        if let Some(confirm) = das.iter().rev().find(|d| d.intent == "confirm_attraction") {
            next.pending_confirmation = Some(confirm.clone());
        }
        if let Some(pending) = &next.pending_request {
            let answered = pending.iter().all(|p| {
                das.iter()
                    .any(|d| d.intent == "inform" && d.text_of(&p.slot).is_some())
            });
            let apologised = das.iter().any(|d| d.intent == "sorry");
            if answered || apologised {
                next.pending_request = None;
            }
        }
        next.history.push(HistoryEntry {
            speaker: Speaker::System,
            das: das.to_vec(),
            utterance: utterance.to_string(),
        });
        Ok(next)
    }
}
