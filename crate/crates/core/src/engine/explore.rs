//! Breadth-first exploration of what the policy can say.

use std::collections::{BTreeSet, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Assets;
use crate::da::{enumerate_das, DialogueAct, EnumerateOptions, Speaker};
use crate::dst::{DialogueState, FlowPhase};
use crate::error::EngineError;
use crate::nlg::{act_key, ActKey};
use crate::policy::{matched_constraints, AttractionDb, Constraint, FlowMemory};

#[derive(Debug, Clone)]
pub struct ExploreOptions {
    /// Customer turns explored exhaustively from the greeting.
    pub max_depth: usize,
    /// Random walks run to the end of the dialogue on top of the
    /// exhaustive part.
    pub walks: usize,
    pub seed: u64,
    /// Candidate customer acts. Categorical slots listed here are restricted
    /// to the given values to keep the state space small.
    pub enumerate: EnumerateOptions,
}

impl ExploreOptions {
    /// One act per turn, with one food type and one companion per way the
    /// attraction database can answer it.
    pub fn standard(assets: &Assets) -> Self {
        let db = assets.policy.db();
        let mut foods: Vec<String> = Vec::new();
        let mut companions: Vec<String> = Vec::new();
        let food_slot = assets.ontology.slot("user_food_type");
        let accompany_slot = assets.ontology.slot("user_accompany");
        let mut food_signatures = HashSet::new();
        for value in food_slot.map(|s| s.allowed_values.clone()).unwrap_or_default() {
            let signature: Vec<bool> = db.attractions().iter().map(|a| a.restaurant_for(&value).is_some()).collect();
            if food_signatures.insert(signature) {
                foods.push(value);
            }
        }
        let mut accompany_signatures = HashSet::new();
        for value in accompany_slot.map(|s| s.allowed_values.clone()).unwrap_or_default() {
            let signature: Vec<bool> = db
                .attractions()
                .iter()
                .map(|a| a.suitable_accompany.contains(&value))
                .collect();
            if accompany_signatures.insert(signature) {
                companions.push(value);
            }
        }
        let names = db.names();
        let enumerate = EnumerateOptions::new(1)
            .seed("user_name", &["Taro"])
            .seed("attraction_name", &as_refs(&names))
            .seed("user_food_type", &as_refs(&foods))
            .seed("user_accompany", &as_refs(&companions))
            .seed("attraction_parking", &["yes"])
            .seed("attraction_rain", &["ok"])
            .seed("restaurant_match", &["yes"]);
        ExploreOptions {
            max_depth: 3,
            walks: 1000,
            seed: 0,
            enumerate,
        }
    }
}

fn as_refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

/// What the shape of the next decisions can depend on. Slot values only
/// matter through the constraints each attraction satisfies; the customer
/// acts and the confirmation outcome are replaced by the next customer turn.
fn signature(state: &DialogueState, db: &AttractionDb) -> String {
    let known: BTreeSet<&String> = state.profile.keys().chain(state.belief.keys()).collect();
    let matched: Vec<Vec<Constraint>> = db
        .attractions()
        .iter()
        .map(|a| matched_constraints(&state.belief, &state.profile, a))
        .collect();
    let pending: Option<Vec<&str>> = state
        .pending_request
        .as_ref()
        .map(|p| p.iter().map(|p| p.slot.as_str()).collect());
    let last_system: Vec<ActKey> = state.last_system_das().iter().map(act_key).collect();
    format!(
        "{known:?}|{matched:?}|{:?}|{pending:?}|{:?}|{}|{:?}|{:?}|{last_system:?}",
        state.focused_attraction,
        state.pending_confirmation,
        state.recommendation_rejected,
        state.phase,
        FlowMemory::from_state(state),
    )
}

fn config_error(e: impl std::fmt::Display) -> EngineError {
    EngineError::Config(e.to_string())
}

/// Every `(intent, slot set)` the policy emits on the explored paths: all
/// paths of at most `max_depth` customer turns drawn from the candidate acts
/// (plus silence), then `walks` random paths until the dialogue ends. Each
/// step also records the closing the turn budget would force.
pub fn reachable_system_keys(assets: &Assets, options: &ExploreOptions) -> Result<BTreeSet<ActKey>, EngineError> {
    let tracker = &assets.tracker;
    let policy = &assets.policy;
    let mut moves: Vec<Vec<DialogueAct>> = vec![Vec::new()];
    moves.extend(
        enumerate_das(&assets.ontology, Speaker::Customer, &options.enumerate)
            .map_err(config_error)?
            .into_iter()
            .map(|d| vec![d]),
    );
    let budget = policy.config().turn_budget;
    let mut keys = BTreeSet::new();

    // one customer turn; `None` once the dialogue is over
    let step = |state: &DialogueState, das: &[DialogueAct], keys: &mut BTreeSet<ActKey>| {
        let heard = tracker.update(state, das, "").map_err(config_error)?;
        let mut at_limit = heard.clone();
        at_limit.turn_count = at_limit.turn_count.max(budget);
        let forced = policy.decide(&at_limit).map_err(config_error)?;
        keys.extend(forced.das.iter().map(act_key));
        let decision = policy.decide(&heard).map_err(config_error)?;
        keys.extend(decision.das.iter().map(act_key));
        if decision.next_phase == FlowPhase::Done {
            return Ok::<_, EngineError>(None);
        }
        let next = tracker
            .note_system_turn(&heard, &decision.das, "")
            .and_then(|s| s.with_phase(decision.next_phase))
            .map_err(config_error)?;
        Ok(Some(next))
    };

    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    queue.push_back((tracker.new_state(), 0usize));
    while let Some((state, depth)) = queue.pop_front() {
        for das in &moves {
            let Some(next) = step(&state, das, &mut keys)? else { continue };
            if depth + 1 < options.max_depth && seen.insert(signature(&next, policy.db())) {
                queue.push_back((next, depth + 1));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for _ in 0..options.walks {
        let mut state = tracker.new_state();
        while let Some(next) = step(&state, &moves[rng.random_range(0..moves.len())], &mut keys)? {
            state = next;
        }
    }
    Ok(keys)
}
