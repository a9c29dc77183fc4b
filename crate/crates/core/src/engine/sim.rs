//! Scripted and randomized customers.

use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Engine, TurnRecord};
use crate::config::Assets;
use crate::da::{enumerate_das, parse_das, serialize_da_list, validate_all, DialogueAct, EnumerateOptions, Ontology, Speaker};
use crate::dst::FlowPhase;
use crate::error::EngineError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepInput {
    Utterance(String),
    Acts(Vec<DialogueAct>),
    Silence,
}

impl std::fmt::Display for StepInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepInput::Utterance(u) => write!(f, "{u:?}"),
            StepInput::Acts(das) => f.write_str(&serialize_da_list(das)),
            StepInput::Silence => f.write_str("(silent)"),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
struct StepDoc {
    utterance: Option<String>,
    da: Option<String>,
    #[serde(default)]
    silence: bool,
    expect: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(try_from = "StepDoc")]
pub struct SimStep {
    pub input: StepInput,
    /// System intents expected in reply, in order.
    pub expect: Option<Vec<String>>,
}

impl TryFrom<StepDoc> for SimStep {
    type Error = String;

    fn try_from(doc: StepDoc) -> Result<Self, String> {
        let input = match (doc.utterance, doc.da, doc.silence) {
            (Some(u), None, false) => StepInput::Utterance(u),
            (None, Some(d), false) => StepInput::Acts(parse_das(&d).map_err(|e| e.to_string())?),
            (None, None, true) => StepInput::Silence,
            _ => return Err("a step needs exactly one of `utterance`, `da` or `silence = true`".into()),
        };
        Ok(SimStep {
            input,
            expect: doc.expect,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct SimScript {
    #[serde(default)]
    pub steps: Vec<SimStep>,
}

impl SimScript {
    pub fn from_toml_str(text: &str, ontology: &Ontology) -> Result<Self, EngineError> {
        let script: SimScript = toml::from_str(text).map_err(|e| EngineError::Config(e.to_string()))?;
        script.validate(ontology)?;
        Ok(script)
    }

    pub fn load(path: impl AsRef<Path>, ontology: &Ontology) -> Result<Self, EngineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, ontology)
    }

    pub fn validate(&self, ontology: &Ontology) -> Result<(), EngineError> {
        for (n, step) in self.steps.iter().enumerate() {
            if let StepInput::Acts(das) = &step.input {
                validate_all(das, ontology, Some(Speaker::Customer))
                    .map_err(|e| EngineError::Config(format!("step {}: {e}", n + 1)))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpectationFailure {
    /// 1-based step number.
    pub step: usize,
    pub expected: Vec<String>,
    /// `None` when the session ended before the step ran.
    pub actual: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepReport {
    pub input: String,
    pub system_intents: Vec<String>,
    pub system_das: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimReport {
    pub session_id: String,
    pub greeting: Vec<String>,
    pub steps: Vec<StepReport>,
    /// Steps not run because the session was already over.
    pub skipped: usize,
    pub failures: Vec<ExpectationFailure>,
    pub final_phase: FlowPhase,
    pub turn_count: u32,
    pub transcript: Vec<TurnRecord>,
}

impl SimReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// System intents of all script steps, in order, excluding the greeting.
    pub fn system_intents(&self) -> Vec<String> {
        self.steps.iter().flat_map(|s| s.system_intents.iter().cloned()).collect()
    }
}

impl Engine {
    /// Runs `script` in a fresh session after a silent opening turn that
    /// produces the greeting. The session is closed afterwards.
    pub fn simulate(&self, script: &SimScript) -> Result<SimReport, EngineError> {
        script.validate(&self.assets.ontology)?;
        let id = self.open_session()?;
        let greeting = self.run_turn(&id, "")?;
        let mut steps = Vec::new();
        let mut failures = Vec::new();
        let mut skipped = 0;
        for (n, step) in script.steps.iter().enumerate() {
            if self.state(&id)?.phase == FlowPhase::Done {
                skipped += 1;
                if let Some(expected) = &step.expect {
                    failures.push(ExpectationFailure {
                        step: n + 1,
                        expected: expected.clone(),
                        actual: None,
                    });
                }
                continue;
            }
            let record = match &step.input {
                StepInput::Utterance(u) => self.run_turn(&id, u)?,
                StepInput::Acts(das) => self.run_acts(&id, das.clone())?,
                StepInput::Silence => self.run_turn(&id, "")?,
            };
            let intents: Vec<String> = record.system_intents().map(str::to_string).collect();
            if let Some(expected) = &step.expect {
                if *expected != intents {
                    failures.push(ExpectationFailure {
                        step: n + 1,
                        expected: expected.clone(),
                        actual: Some(intents.clone()),
                    });
                }
            }
            steps.push(StepReport {
                input: step.input.to_string(),
                system_intents: intents,
                system_das: serialize_da_list(&record.system_das),
            });
        }
        let state = self.state(&id)?;
        let transcript = self.close_session(&id)?;
        Ok(SimReport {
            session_id: id,
            greeting: greeting.system_intents().map(str::to_string).collect(),
            steps,
            skipped,
            failures,
            final_phase: state.phase,
            turn_count: state.turn_count,
            transcript,
        })
    }
}

/// Random customer: valid acts, silence, gibberish and corpus utterances.
#[derive(Debug, Clone)]
pub struct UserSimulator {
    acts: Vec<DialogueAct>,
    utterances: Vec<String>,
}

impl UserSimulator {
    pub fn new(assets: &Assets) -> Result<Self, EngineError> {
        let names = assets.policy.db().names();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let options = EnumerateOptions::new(2)
            .seed("user_name", &["Taro", "Hanako"])
            .seed("attraction_name", &names);
        let acts = enumerate_das(&assets.ontology, Speaker::Customer, &options)
            .map_err(|e| EngineError::Config(e.to_string()))?;
        let utterances = assets.corpus.iter().map(|p| p.utterance.clone()).collect();
        Ok(UserSimulator { acts, utterances })
    }

    pub fn act_pool(&self) -> &[DialogueAct] {
        &self.acts
    }

    fn gibberish(rng: &mut ChaCha8Rng) -> String {
        const LETTERS: &[u8] = b"bcdfghjklmnpqrstvwxz";
        let words = rng.random_range(1..=4);
        (0..words)
            .map(|_| {
                let len = rng.random_range(3..=8);
                (0..len)
                    .map(|_| LETTERS[rng.random_range(0..LETTERS.len())] as char)
                    .collect::<String>()
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// A script of `len` random steps, identical for identical seeds.
    pub fn script(&self, seed: u64, len: usize) -> SimScript {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = (0..len)
            .map(|_| {
                let roll: f64 = rng.random();
                let input = if roll < 0.25 {
                    StepInput::Silence
                } else if roll < 0.40 {
                    StepInput::Utterance(Self::gibberish(&mut rng))
                } else if roll < 0.55 && !self.utterances.is_empty() {
                    StepInput::Utterance(self.utterances.choose(&mut rng).cloned().unwrap_or_default())
                } else {
                    let count = if rng.random_bool(0.2) { 2 } else { 1 };
                    StepInput::Acts(self.acts.choose_multiple(&mut rng, count).cloned().collect())
                };
                SimStep { input, expect: None }
            })
            .collect();
        SimScript { steps }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::testutil::config_dir;

    fn engine(file: &str) -> Engine {
        Engine::new(Arc::new(Assets::load(config_dir().join(file)).unwrap()))
    }

    #[test]
    fn empty_script_stops_after_greeting() {
        let engine = engine("engine.toml");
        let report = engine.simulate(&SimScript::default()).unwrap();
        assert_eq!(report.greeting, ["welcome", "self_introduction"]);
        assert!(report.steps.is_empty());
        assert_eq!(report.final_phase, FlowPhase::ProfileGathering);
        assert_eq!(report.turn_count, 1);
        assert_eq!(engine.session_count(), 0);
    }

    #[test]
    fn replay_script_matches() {
        let engine = engine("replay.toml");
        let script = SimScript::load(config_dir().join("scripts/replay.toml"), &engine.assets().ontology).unwrap();
        let report = engine.simulate(&script).unwrap();
        assert!(report.passed(), "{:?}", report.failures);
        assert_eq!(report.greeting, ["welcome", "self_introduction"]);
        assert_eq!(
            report.system_intents(),
            ["request", "good", "recommend_target", "ask_question", "inform", "inform"]
        );
    }

    #[test]
    fn replay_through_understanding() {
        let engine = engine("replay.toml");
        let script =
            SimScript::load(config_dir().join("scripts/replay_text.toml"), &engine.assets().ontology).unwrap();
        let report = engine.simulate(&script).unwrap();
        assert!(report.passed(), "{:?}", report.failures);
        let last = report.transcript.last().unwrap();
        assert!(last.system_utterance.contains("11:00-21:00"));
        assert!(last.system_utterance.contains("9:30-17:00"));
    }

    #[test]
    fn mismatch_is_reported() {
        let engine = engine("replay.toml");
        let script = SimScript::from_toml_str(
            r#"
            [[steps]]
            silence = true
            expect = ["goodbye"]
            "#,
            &engine.assets().ontology,
        )
        .unwrap();
        let report = engine.simulate(&script).unwrap();
        assert_eq!(
            report.failures,
            vec![ExpectationFailure {
                step: 1,
                expected: vec!["goodbye".into()],
                actual: Some(vec!["request".into()])
            }]
        );
    }

    #[test]
    fn steps_after_done_are_skipped() {
        let engine = engine("engine.toml");
        let script = SimScript::from_toml_str(
            r#"
            [[steps]]
            da = "goodbye ()"
            [[steps]]
            silence = true
            expect = ["ask_question"]
            "#,
            &engine.assets().ontology,
        )
        .unwrap();
        let report = engine.simulate(&script).unwrap();
        assert_eq!(report.final_phase, FlowPhase::Done);
        assert_eq!(report.skipped, 1);
        assert_eq!(report.failures[0].actual, None);
    }

    #[test]
    fn bad_steps_are_rejected() {
        let ont = crate::testutil::shipped_ontology();
        for text in [
            "[[steps]]\nsilence = true\nda = \"affirm ()\"",
            "[[steps]]\nexpect = []",
            "[[steps]]\nda = \"welcome ()\"",
            "[[steps]]\nda = \"inform (user_accompany=\"",
        ] {
            assert!(SimScript::from_toml_str(text, &ont).is_err(), "{text}");
        }
    }

    #[test]
    fn random_scripts_are_seeded() {
        let assets = Assets::load(config_dir().join("engine.toml")).unwrap();
        let sim = UserSimulator::new(&assets).unwrap();
        assert_eq!(sim.script(3, 20), sim.script(3, 20));
        assert_ne!(sim.script(3, 20), sim.script(4, 20));
        let script = sim.script(9, 200);
        script.validate(&assets.ontology).unwrap();
        assert!(script.steps.iter().any(|s| s.input == StepInput::Silence));
        assert!(script.steps.iter().any(|s| matches!(s.input, StepInput::Acts(_))));
        assert!(script.steps.iter().any(|s| matches!(s.input, StepInput::Utterance(_))));
    }
}
