use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use flowbot_core::da::{parse_das, DialogueAct, Ontology};
use flowbot_core::dst::{Tracker, TrackerConfig};
use proptest::prelude::*;

const NAMES: [&str; 3] = ["Tokyo Trick Art Museum", "Tokyo Water Science Museum", "Nowhere"];
const KNOWN: [&str; 2] = ["Tokyo Trick Art Museum", "Tokyo Water Science Museum"];

fn tracker() -> Tracker {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config");
    let ontology = Ontology::load_layered(&[dir.join("ontology.toml"), dir.join("ontology_ext.toml")]).unwrap();
    let mut config = TrackerConfig::standard();
    config.known_attractions = KNOWN.iter().map(|s| s.to_string()).collect();
    Tracker::new(Arc::new(ontology), config)
}

fn act(text: &str) -> DialogueAct {
    parse_das(text).unwrap().remove(0)
}

#[derive(Debug, Clone)]
struct Turn {
    customer: bool,
    /// Per act: which name it carries, if any.
    names: Vec<Option<usize>>,
}

impl Turn {
    fn acts(&self) -> Vec<DialogueAct> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, name)| match (self.customer, name) {
                (true, Some(n)) => act(&format!("inform (attraction_name={})", NAMES[*n])),
                (true, None) => act("request (attraction_open_time=?)"),
                (false, Some(n)) if i % 2 == 0 => act(&format!("recommend_target (attraction_name={})", NAMES[*n])),
                (false, Some(n)) => act(&format!("inform (attraction_name={})", NAMES[*n])),
                (false, None) => act("ask_question ()"),
            })
            .collect()
    }
}

fn turns() -> impl Strategy<Value = Vec<Turn>> {
    let names = prop::collection::vec(prop::option::of(0..NAMES.len()), 1..3);
    prop::collection::vec((any::<bool>(), names).prop_map(|(customer, names)| Turn { customer, names }), 0..12)
}

#[derive(Debug, Clone)]
struct Inform {
    slot: &'static str,
    value: &'static str,
}

fn informs() -> impl Strategy<Value = Vec<Inform>> {
    let one = prop_oneof![
        prop::sample::select(vec!["Taro", "Hanako"]).prop_map(|value| Inform { slot: "user_name", value }),
        prop::sample::select(vec!["child", "partner", "friend"]).prop_map(|value| Inform { slot: "user_accompany", value }),
        prop::sample::select(vec!["steak", "sushi", "ramen"]).prop_map(|value| Inform { slot: "user_food_type", value }),
    ];
    prop::collection::vec(one, 0..10)
}

proptest! {
    #[test]
    fn focus_is_the_last_known_attraction_mentioned(turns in turns()) {
        let t = tracker();
        let mut state = t.new_state();
        for turn in &turns {
            let acts = turn.acts();
            state = if turn.customer {
                t.update(&state, &acts, "").unwrap()
            } else {
                t.note_system_turn(&state, &acts, "").unwrap()
            };
        }
        let mut expected = None;
        for name in turns.iter().flat_map(|t| t.names.iter().flatten()) {
            if KNOWN.contains(&NAMES[*name]) {
                expected = Some(NAMES[*name]);
            }
        }
        prop_assert_eq!(state.focused_attraction.as_deref(), expected);
    }

    #[test]
    fn last_inform_wins_and_slots_split_by_role(informs in informs()) {
        let t = tracker();
        let mut state = t.new_state();
        for i in &informs {
            state = t.update(&state, &[act(&format!("inform ({}={})", i.slot, i.value))], "").unwrap();
        }
        let mut last = BTreeMap::new();
        for i in &informs {
            last.insert(i.slot.to_string(), i.value.to_string());
        }
        let (profile, belief): (BTreeMap<_, _>, BTreeMap<_, _>) =
            last.into_iter().partition(|(slot, _)| slot == "user_name");
        prop_assert_eq!(&state.profile, &profile);
        prop_assert_eq!(&state.belief, &belief);
        prop_assert_eq!(state.turn_count as usize, informs.len());
    }
}
