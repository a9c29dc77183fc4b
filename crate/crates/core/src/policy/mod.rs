//! Flow-driven dialogue policy.
//!
//! The dialogue follows a fixed flow: greet, gather the customer's profile,
//! introduce both attractions, recommend one, answer questions, say goodbye.
//! [`Policy::decide`] maps the current [`DialogueState`] to the next system
//! acts. A phase with nothing left to say hands over to the next phase within
//! the same decision, which is how silence moves the dialogue forward.

mod db;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use db::{well_formed_open_time, AttractionDb, AttractionRecord, Parking, RainSuitability, RestaurantRecord};

use crate::da::{validate_da, DialogueAct, Ontology, SlotValue, Speaker, REQUEST_INTENT};
use crate::dst::{DialogueState, FlowPhase, ATTRACTION_NAME};
use crate::error::PolicyError;

pub const DEFAULT_TURN_BUDGET: u32 = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// Slots asked for during profile gathering, in order.
    pub profile_slots: Vec<String>,
    pub introduce_attractions: bool,
    /// Customer turns after which the dialogue is closed.
    pub turn_budget: u32,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            profile_slots: vec![
                "user_name".to_string(),
                "user_accompany".to_string(),
                "user_food_type".to_string(),
            ],
            introduce_attractions: true,
            turn_budget: DEFAULT_TURN_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub das: Vec<DialogueAct>,
    pub next_phase: FlowPhase,
    pub rationale: String,
}

/// A customer preference an attraction can satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    FoodType,
    Accompany,
    Weather,
    Parking,
}

impl Constraint {
    /// Preference order when choosing the feature that backs a recommendation.
    pub fn weight(self) -> u32 {
        match self {
            Constraint::FoodType => 4,
            Constraint::Accompany => 3,
            Constraint::Weather => 2,
            Constraint::Parking => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoredAttraction {
    /// Position in the database.
    pub index: usize,
    pub name: String,
    pub score: u32,
    pub matched: Vec<Constraint>,
}

fn lookup<'a>(
    belief: &'a std::collections::BTreeMap<String, String>,
    profile: &'a std::collections::BTreeMap<String, String>,
    slot: &str,
) -> Option<&'a str> {
    belief.get(slot).or_else(|| profile.get(slot)).map(String::as_str)
}

/// Constraints from the belief state and profile that `attraction` satisfies.
pub fn matched_constraints(
    belief: &std::collections::BTreeMap<String, String>,
    profile: &std::collections::BTreeMap<String, String>,
    attraction: &AttractionRecord,
) -> Vec<Constraint> {
    let mut matched = Vec::new();
    if let Some(food) = lookup(belief, profile, "user_food_type") {
        if attraction.restaurant_for(food).is_some() {
            matched.push(Constraint::FoodType);
        }
    }
    if let Some(who) = lookup(belief, profile, "user_accompany") {
        if attraction.suitable_accompany.iter().any(|a| a == who) {
            matched.push(Constraint::Accompany);
        }
    }
    if lookup(belief, profile, "user_weather") == Some("rainy") && attraction.rain == RainSuitability::Ok {
        matched.push(Constraint::Weather);
    }
    if lookup(belief, profile, "user_car") == Some("yes") && attraction.parking == Parking::Yes {
        matched.push(Constraint::Parking);
    }
    matched
}

/// Ranks attractions by the number of satisfied constraints; ties keep
/// database order.
pub fn score_attractions(
    belief: &std::collections::BTreeMap<String, String>,
    profile: &std::collections::BTreeMap<String, String>,
    db: &AttractionDb,
) -> Vec<ScoredAttraction> {
    let mut ranked: Vec<ScoredAttraction> = db
        .attractions()
        .iter()
        .enumerate()
        .map(|(index, a)| {
            let matched = matched_constraints(belief, profile, a);
            ScoredAttraction {
                index,
                name: a.name.clone(),
                score: matched.len() as u32,
                matched,
            }
        })
        .collect();
    ranked.sort_by(|a, b| b.score.cmp(&a.score).then(a.index.cmp(&b.index)));
    ranked
}

/// Answers requested slots about attractions: the focused attraction first
/// (database order when nothing is focused), then every other attraction.
/// Requests that are not attraction attributes get a single `sorry`.
pub fn answer_request(pending: &[SlotValue], state: &DialogueState, db: &AttractionDb) -> Vec<DialogueAct> {
    let mut order: Vec<&AttractionRecord> = Vec::new();
    if let Some(focus) = state.focused_attraction.as_deref().and_then(|n| db.get(n)) {
        order.push(focus);
    }
    order.extend(
        db.attractions()
            .iter()
            .filter(|a| Some(a.name.as_str()) != state.focused_attraction.as_deref()),
    );
    let mut das = Vec::new();
    for attraction in order {
        for pair in pending {
            if let Some(value) = attraction.attribute(&pair.slot) {
                das.push(
                    DialogueAct::new("inform")
                        .with(ATTRACTION_NAME, attraction.name.clone())
                        .with(pair.slot.clone(), value),
                );
            }
        }
    }
    if pending
        .iter()
        .any(|p| db.attractions()[0].attribute(&p.slot).is_none())
    {
        das.push(DialogueAct::new("sorry"));
    }
    das
}

/// Tells the customer whether a restaurant serving their preferred food is
/// near the recommended attraction. `None` when no food preference is known.
pub fn restaurant_fallback(
    belief: &std::collections::BTreeMap<String, String>,
    recommended: &AttractionRecord,
) -> Option<Vec<DialogueAct>> {
    let food = belief.get("user_food_type")?;
    Some(match recommended.restaurant_for(food) {
        Some(r) => vec![DialogueAct::new("inform")
            .with("restaurant_match", "yes")
            .with("restaurant_name", r.name.clone())],
        None => vec![
            DialogueAct::new("sorry"),
            DialogueAct::new("inform").with("restaurant_match", "no"),
        ],
    })
}

/// Facts about the dialogue so far that the flow depends on.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct FlowMemory {
    pub asked: Vec<String>,
    pub recommended: Vec<String>,
    pub invited_since_recommendation: bool,
    pub restaurant_told: bool,
}

impl FlowMemory {
    pub fn from_state(state: &DialogueState) -> Self {
        let mut memory = FlowMemory::default();
        for da in state.system_acts() {
            match da.intent.as_str() {
                REQUEST_INTENT => {
                    for pair in &da.pairs {
                        if !memory.asked.contains(&pair.slot) {
                            memory.asked.push(pair.slot.clone());
                        }
                    }
                }
                "recommend_target" => {
                    if let Some(name) = da.text_of(ATTRACTION_NAME) {
                        memory.recommended.push(name.to_string());
                    }
                    memory.invited_since_recommendation = false;
                }
                "ask_question" => memory.invited_since_recommendation = true,
                "inform" if da.get("restaurant_match").is_some() => memory.restaurant_told = true,
                _ => {}
            }
        }
        memory
    }
}

#[derive(Debug, Clone)]
pub struct Policy {
    ontology: Arc<Ontology>,
    db: Arc<AttractionDb>,
    config: PolicyConfig,
}

fn decision(das: Vec<DialogueAct>, next_phase: FlowPhase, rationale: impl Into<String>) -> PolicyDecision {
    PolicyDecision {
        das,
        next_phase,
        rationale: rationale.into(),
    }
}

impl Policy {
    pub fn new(ontology: Arc<Ontology>, db: Arc<AttractionDb>, config: PolicyConfig) -> Result<Self, PolicyError> {
        if db.attractions().len() != 2 {
            return Err(PolicyError::Database(format!(
                "the recommendation task needs exactly two attractions, found {}",
                db.attractions().len()
            )));
        }
        Ok(Policy { ontology, db, config })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn db(&self) -> &AttractionDb {
        &self.db
    }

    pub fn decide(&self, state: &DialogueState) -> Result<PolicyDecision, PolicyError> {
        if state.phase == FlowPhase::Done {
            return Err(PolicyError::SessionOver);
        }
        let memory = FlowMemory::from_state(state);
        let decision = if state.turn_count >= self.config.turn_budget {
            self.close(state, &memory, true, "budget.finish")
        } else if state.farewell_requested {
            self.close(state, &memory, false, "farewell.customer")
        } else {
            let mut phase = state.phase;
            loop {
                if let Some(d) = self.step(phase, state, &memory) {
                    break d;
                }
                phase = self.successor(phase);
            }
        };
        for da in &decision.das {
            let report = validate_da(da, &self.ontology, Some(Speaker::System));
            if !report.is_empty() {
                return Err(PolicyError::InvalidAct {
                    da: da.to_string(),
                    report,
                });
            }
        }
        debug_assert!(decision.next_phase >= state.phase);
        Ok(decision)
    }

    fn successor(&self, phase: FlowPhase) -> FlowPhase {
        match phase {
            FlowPhase::Greeting => FlowPhase::ProfileGathering,
            FlowPhase::ProfileGathering if self.config.introduce_attractions => FlowPhase::AttractionIntroduction,
            FlowPhase::ProfileGathering | FlowPhase::AttractionIntroduction => FlowPhase::Recommendation,
            FlowPhase::Recommendation => FlowPhase::QuestionAnswering,
            FlowPhase::QuestionAnswering | FlowPhase::Farewell | FlowPhase::Done => FlowPhase::Farewell,
        }
    }

    /// What `phase` has to say, or `None` to hand over to the next phase.
    fn step(&self, phase: FlowPhase, state: &DialogueState, memory: &FlowMemory) -> Option<PolicyDecision> {
        if let Some(pending) = &state.pending_request {
            if phase > FlowPhase::Greeting && phase < FlowPhase::Farewell {
                return Some(decision(
                    answer_request(pending, state, &self.db),
                    phase,
                    "answer.request",
                ));
            }
        }
        match phase {
            FlowPhase::Greeting => Some(decision(
                vec![DialogueAct::new("welcome"), DialogueAct::new("self_introduction")],
                self.successor(phase),
                "greeting",
            )),
            FlowPhase::ProfileGathering => self.profile_step(state, memory),
            FlowPhase::AttractionIntroduction => {
                if !self.config.introduce_attractions {
                    return None;
                }
                let mut das = vec![DialogueAct::new("start_attraction_introduction")];
                das.extend(self.db.attractions().iter().map(|a| {
                    DialogueAct::new("inform")
                        .with(ATTRACTION_NAME, a.name.clone())
                        .with("attraction_genre", a.genre.clone())
                        .with("attraction_description", a.description.clone())
                }));
                Some(decision(das, self.successor(phase), "introduction"))
            }
            FlowPhase::Recommendation => {
                let ranked = score_attractions(&state.belief, &state.profile, &self.db);
                Some(decision(
                    vec![self.recommendation(&ranked[0], state)],
                    self.successor(phase),
                    "recommend.argmax",
                ))
            }
            FlowPhase::QuestionAnswering => Some(self.qa_step(state, memory)),
            FlowPhase::Farewell | FlowPhase::Done => Some(self.close(state, memory, false, "farewell")),
        }
    }

    fn profile_step(&self, state: &DialogueState, memory: &FlowMemory) -> Option<PolicyDecision> {
        let informed: Vec<&SlotValue> = state
            .last_customer_das()
            .iter()
            .filter(|d| d.intent == "inform")
            .flat_map(|d| d.pairs.iter())
            .collect();
        let good = self.ontology.intent("good");
        let acknowledgeable = |slot: &str| good.is_some_and(|g| g.allowed_slots.iter().any(|s| s == slot));
        let last_asked: Vec<&str> = state
            .last_system_das()
            .iter()
            .filter(|d| d.intent == REQUEST_INTENT)
            .flat_map(|d| d.slot_names())
            .collect();
        let ack_slot = informed
            .iter()
            .find(|p| last_asked.contains(&p.slot.as_str()) && acknowledgeable(&p.slot))
            .or_else(|| {
                self.config
                    .profile_slots
                    .iter()
                    .find_map(|s| informed.iter().find(|p| &p.slot == s && acknowledgeable(s)))
            });
        let ack = ack_slot.and_then(|p| {
            p.value
                .as_text()
                .map(|v| DialogueAct::new("good").with(p.slot.clone(), v))
        });
        let next_slot = self.next_profile_slot(state, memory);

        match (ack, next_slot) {
            (ack, Some(slot)) => {
                let mut das: Vec<DialogueAct> = ack.into_iter().collect();
                das.push(DialogueAct::new(REQUEST_INTENT).with_requested(slot.clone()));
                Some(decision(das, FlowPhase::ProfileGathering, format!("profile.ask.{slot}")))
            }
            (Some(ack), None) => Some(decision(
                vec![ack],
                self.successor(FlowPhase::ProfileGathering),
                "profile.ack",
            )),
            (None, None) => None,
        }
    }

    fn next_profile_slot(&self, state: &DialogueState, memory: &FlowMemory) -> Option<&String> {
        self.config
            .profile_slots
            .iter()
            .find(|s| state.known(s).is_none() && !memory.asked.contains(s))
    }

    /// `recommend_target` backed by the heaviest satisfied constraint, or by
    /// rain suitability (else genre) when nothing matched.
    fn recommendation(&self, target: &ScoredAttraction, state: &DialogueState) -> DialogueAct {
        let record = &self.db.attractions()[target.index];
        let da = DialogueAct::new("recommend_target").with(ATTRACTION_NAME, record.name.clone());
        let known = |slot: &str| lookup(&state.belief, &state.profile, slot).unwrap_or_default().to_string();
        match target.matched.iter().max_by_key(|c| c.weight()) {
            Some(Constraint::FoodType) => da.with("user_food_type", known("user_food_type")),
            Some(Constraint::Accompany) => da.with("user_accompany", known("user_accompany")),
            Some(Constraint::Weather) => da.with("attraction_rain", "ok"),
            Some(Constraint::Parking) => da.with("attraction_parking", "yes"),
            None if record.rain == RainSuitability::Ok => da.with("attraction_rain", "ok"),
            None => da.with("attraction_genre", record.genre.clone()),
        }
    }

    fn qa_step(&self, state: &DialogueState, memory: &FlowMemory) -> PolicyDecision {
        let customer = state.last_customer_das();
        let said = |intent: &str| customer.iter().any(|d| d.intent == intent);
        let phase = FlowPhase::QuestionAnswering;

        if state.recommendation_rejected && memory.recommended.len() == 1 {
            let ranked = score_attractions(&state.belief, &state.profile, &self.db);
            if let Some(runner_up) = ranked.iter().find(|r| r.name != memory.recommended[0]) {
                return decision(vec![self.recommendation(runner_up, state)], phase, "recommend.runner_up");
            }
        }
        if memory.recommended.len() >= 2 {
            return self.close(state, memory, false, "farewell.after_rerecommendation");
        }
        if let Some(outcome) = &state.confirmation {
            if outcome.accepted {
                return self.close(state, memory, false, "farewell.confirmed");
            }
            return decision(vec![DialogueAct::new("ask_question")], phase, "qa.invite");
        }
        if let Some(name) = customer
            .iter()
            .filter_map(|d| d.text_of(ATTRACTION_NAME))
            .next_back()
            .filter(|n| self.db.get(n).is_some())
        {
            return decision(
                vec![DialogueAct::new("confirm_attraction").with(ATTRACTION_NAME, name)],
                phase,
                "qa.confirm",
            );
        }
        if said("thankyou") {
            return self.close(state, memory, false, "farewell.thanks");
        }
        let invited_last = state.last_system_das().iter().any(|d| d.intent == "ask_question");
        if said("negate") && invited_last {
            return self.close(state, memory, false, "farewell.no_questions");
        }
        if !memory.invited_since_recommendation {
            return decision(vec![DialogueAct::new("ask_question")], phase, "qa.invite");
        }
        if let Some((mut das, rationale)) = self.restaurant_owed(state, memory) {
            das.push(DialogueAct::new("ask_question"));
            return decision(das, phase, rationale);
        }
        self.close(state, memory, false, "farewell.idle")
    }

    /// Restaurant information not yet given although a food preference is
    /// known, for the attraction recommended last (or the current favourite).
    fn restaurant_owed(&self, state: &DialogueState, memory: &FlowMemory) -> Option<(Vec<DialogueAct>, &'static str)> {
        if memory.restaurant_told {
            return None;
        }
        let target = match memory.recommended.last().and_then(|n| self.db.get(n)) {
            Some(record) => record,
            None => {
                let ranked = score_attractions(&state.belief, &state.profile, &self.db);
                &self.db.attractions()[ranked[0].index]
            }
        };
        let das = restaurant_fallback(&state.belief, target)?;
        let rationale = if das[0].intent == "sorry" {
            "restaurant.fallback"
        } else {
            "restaurant.match"
        };
        Some((das, rationale))
    }

    fn close(&self, state: &DialogueState, memory: &FlowMemory, finish: bool, rationale: &str) -> PolicyDecision {
        let mut das = Vec::new();
        if finish {
            das.push(DialogueAct::new("finish_for_time_limit"));
        }
        if let Some((owed, _)) = self.restaurant_owed(state, memory) {
            das.extend(owed);
        }
        das.push(DialogueAct::new("thank-you_for_visiting"));
        das.push(DialogueAct::new("goodbye"));
        decision(das, FlowPhase::Done, rationale)
    }
}
