use std::collections::{HashMap, HashSet};

use super::{validate_da, DialogueAct, Ontology, SlotValue, Speaker, Value, REQUEST_INTENT};
use crate::error::CapacityError;

pub const DEFAULT_CEILING: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct EnumerateOptions {
    pub max_pairs: usize,
    /// Candidate values per slot. Required for string slots, which otherwise
    /// only take part under `request` (as `?`); for a categorical slot a seed
    /// list replaces the allowed values. `request` always uses `?`.
    pub seeds: HashMap<String, Vec<String>>,
    pub ceiling: usize,
}

impl EnumerateOptions {
    pub fn new(max_pairs: usize) -> Self {
        EnumerateOptions {
            max_pairs,
            seeds: HashMap::new(),
            ceiling: DEFAULT_CEILING,
        }
    }

    pub fn seed(mut self, slot: impl Into<String>, values: &[&str]) -> Self {
        self.seeds
            .insert(slot.into(), values.iter().map(|v| v.to_string()).collect());
        self
    }
}

/// Lists every valid act the speaker can produce with at most `max_pairs`
/// pairs. Order: intent declaration order, then slot-index combinations in
/// lexicographic order, then values in domain order.
pub fn enumerate_das(
    ontology: &Ontology,
    speaker: Speaker,
    options: &EnumerateOptions,
) -> Result<Vec<DialogueAct>, CapacityError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for intent in ontology.intents_for(speaker) {
        let limit = options.max_pairs.min(intent.max_slots_per_da);
        let domains: Vec<(&str, Vec<Value>)> = intent
            .allowed_slots
            .iter()
            .map(|slot| (slot.as_str(), domain(ontology, &intent.name, slot, options)))
            .filter(|(_, values)| !values.is_empty())
            .collect();

        let mut chosen = Vec::new();
        let mut emit = |combo: &[usize]| -> Result<(), CapacityError> {
            let mut pending = vec![Vec::<SlotValue>::new()];
            for &i in combo {
                let (slot, values) = &domains[i];
                pending = pending
                    .into_iter()
                    .flat_map(|prefix| {
                        values.iter().map(move |v| {
                            let mut next = prefix.clone();
                            next.push(SlotValue {
                                slot: slot.to_string(),
                                value: v.clone(),
                            });
                            next
                        })
                    })
                    .collect();
            }
            for pairs in pending {
                let da = DialogueAct {
                    intent: intent.name.clone(),
                    pairs,
                };
                if validate_da(&da, ontology, Some(speaker)).is_empty() && seen.insert(da.clone()) {
                    if out.len() >= options.ceiling {
                        return Err(CapacityError {
                            ceiling: options.ceiling,
                        });
                    }
                    out.push(da);
                }
            }
            Ok(())
        };
        combinations(domains.len(), limit, 0, &mut chosen, &mut emit)?;
    }
    Ok(out)
}

fn domain(ontology: &Ontology, intent: &str, slot: &str, options: &EnumerateOptions) -> Vec<Value> {
    if intent == REQUEST_INTENT {
        return vec![Value::Requested];
    }
    if let Some(seeds) = options.seeds.get(slot) {
        return seeds.iter().cloned().map(Value::Text).collect();
    }
    match ontology.slot(slot) {
        Some(def) if def.is_categorical() => def.allowed_values.iter().cloned().map(Value::Text).collect(),
        _ => Vec::new(),
    }
}

/// Visits every strictly increasing index sequence over `0..n` of length at
/// most `limit` in lexicographic order, starting with the empty sequence.
fn combinations<E>(
    n: usize,
    limit: usize,
    start: usize,
    chosen: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]) -> Result<(), E>,
) -> Result<(), E> {
    visit(chosen)?;
    if chosen.len() == limit {
        return Ok(());
    }
    for i in start..n {
        chosen.push(i);
        combinations(n, limit, i + 1, chosen, visit)?;
        chosen.pop();
    }
    Ok(())
}
