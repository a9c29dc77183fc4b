//! Sessions, the turn pipeline and transcripts.
//!
//! A turn runs NLU, state tracking, policy and NLG in that order. The
//! session state is replaced only after every stage succeeded, so a failing
//! stage leaves the session exactly as it was.

mod explore;
mod sim;

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, TryLockError};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub use explore::{reachable_system_keys, ExploreOptions};
pub use sim::{ExpectationFailure, SimReport, SimScript, SimStep, StepInput, StepReport, UserSimulator};

use crate::config::{Assets, EngineConfig};
use crate::da::{serialize_da_list, validate_all, DialogueAct, Speaker};
use crate::dst::{DialogueState, FlowPhase};
use crate::error::{EngineError, Stage};
use crate::nlg::{cues_for, realize, Cue};
use crate::nlu::NluHypothesis;

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    /// 1-based customer turn number.
    pub turn: u32,
    /// Milliseconds since the Unix epoch; 0 under a fixed clock.
    pub at_ms: u64,
    pub customer_utterance: String,
    pub nlu_hypothesis: NluHypothesis,
    pub system_das: Vec<DialogueAct>,
    pub system_utterance: String,
    pub cues: Vec<Cue>,
    pub phase_before: FlowPhase,
    pub phase_after: FlowPhase,
    pub rationale: String,
    pub latency_ms: u64,
}

impl TurnRecord {
    pub fn system_intents(&self) -> impl Iterator<Item = &str> {
        self.system_das.iter().map(|d| d.intent.as_str())
    }
}

pub fn read_transcript(path: impl AsRef<Path>) -> Result<Vec<TurnRecord>, EngineError> {
    let file = File::open(path)?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| EngineError::Config(format!("transcript line {}: {e}", n + 1)))?;
        records.push(record);
    }
    Ok(records)
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub state: DialogueState,
    pub transcript: Vec<TurnRecord>,
    pub created_at_ms: u64,
    pub config: EngineConfig,
    sink: Option<File>,
}

pub struct Engine {
    assets: Arc<Assets>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

impl Engine {
    pub fn new(assets: Arc<Assets>) -> Self {
        Engine {
            assets,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn assets(&self) -> &Assets {
        &self.assets
    }

    fn now_ms(&self) -> u64 {
        if self.assets.config.fixed_clock {
            return 0;
        }
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    }

    fn transcript_dir(&self) -> Option<&Path> {
        self.assets.config.data_dir.as_deref()
    }

    pub fn transcript_path(&self, id: &str) -> Option<PathBuf> {
        self.transcript_dir().map(|d| d.join(format!("{id}.jsonl")))
    }

    pub fn open_session(&self) -> Result<String, EngineError> {
        let n = self.next_id.fetch_add(1, Ordering::Relaxed);
        let id = match self.assets.config.fixed_seed {
            Some(_) => format!("session-{n:04}"),
            None => uuid::Uuid::new_v4().simple().to_string(),
        };
        let sink = match self.transcript_path(&id) {
            Some(path) => {
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                Some(
                    OpenOptions::new()
                        .create(true)
                        .write(true)
                        .truncate(true)
                        .open(path)?,
                )
            }
            None => None,
        };
        let session = Session {
            id: id.clone(),
            state: self.assets.tracker.new_state(),
            transcript: Vec::new(),
            created_at_ms: self.now_ms(),
            config: self.assets.config.clone(),
            sink,
        };
        self.sessions
            .lock()
            .expect("session table poisoned")
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        tracing::debug!(session = %id, "opened");
        Ok(id)
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, EngineError> {
        self.sessions
            .lock()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| EngineError::UnknownSession(id.to_string()))
    }

    fn with_session<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<T, EngineError>) -> Result<T, EngineError> {
        let handle = self.session(id)?;
        let mut guard = match handle.try_lock() {
            Ok(guard) => guard,
            Err(TryLockError::WouldBlock) => return Err(EngineError::Busy(id.to_string())),
            Err(TryLockError::Poisoned(p)) => p.into_inner(),
        };
        f(&mut guard)
    }

    pub fn state(&self, id: &str) -> Result<DialogueState, EngineError> {
        let handle = self.session(id)?;
        let guard = handle.lock().unwrap_or_else(|p| p.into_inner());
        Ok(guard.state.clone())
    }

    /// JSON snapshot of the session's dialogue state.
    pub fn get_state(&self, id: &str) -> Result<serde_json::Value, EngineError> {
        Ok(self.state(id)?.snapshot())
    }

    pub fn transcript(&self, id: &str) -> Result<Vec<TurnRecord>, EngineError> {
        let handle = self.session(id)?;
        let guard = handle.lock().unwrap_or_else(|p| p.into_inner());
        Ok(guard.transcript.clone())
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session table poisoned").len()
    }

    /// Forgets the session and returns its transcript.
    pub fn close_session(&self, id: &str) -> Result<Vec<TurnRecord>, EngineError> {
        let handle = self
            .sessions
            .lock()
            .expect("session table poisoned")
            .remove(id)
            .ok_or_else(|| EngineError::UnknownSession(id.to_string()))?;
        let mut guard = handle.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(sink) = guard.sink.as_mut() {
            sink.flush()?;
            sink.sync_data()?;
        }
        tracing::debug!(session = %id, turns = guard.transcript.len(), "closed");
        Ok(std::mem::take(&mut guard.transcript))
    }

    /// Runs one customer turn from text. An empty utterance is silence.
    pub fn run_turn(&self, id: &str, utterance: &str) -> Result<TurnRecord, EngineError> {
        self.with_session(id, |session| {
            if session.state.phase == FlowPhase::Done {
                return Err(EngineError::SessionDone);
            }
            let started = Instant::now();
            let hypothesis = self.assets.nlu.understand(utterance, &session.state);
            self.finish_turn(session, utterance.to_string(), hypothesis, started)
        })
    }

    /// Runs one customer turn from acts, bypassing understanding.
    pub fn run_acts(&self, id: &str, das: Vec<DialogueAct>) -> Result<TurnRecord, EngineError> {
        validate_all(&das, &self.assets.ontology, Some(Speaker::Customer)).map_err(|e| EngineError::stage(Stage::Dst, e))?;
        self.with_session(id, |session| {
            if session.state.phase == FlowPhase::Done {
                return Err(EngineError::SessionDone);
            }
            let started = Instant::now();
            let utterance = serialize_da_list(&das);
            self.finish_turn(session, utterance, NluHypothesis::scripted(das), started)
        })
    }

    fn finish_turn(
        &self,
        session: &mut Session,
        utterance: String,
        hypothesis: NluHypothesis,
        started: Instant,
    ) -> Result<TurnRecord, EngineError> {
        let assets = &self.assets;
        let before = &session.state;
        let heard = assets
            .tracker
            .update(before, &hypothesis.das, &utterance)
            .map_err(|e| EngineError::stage(Stage::Dst, e))?;
        let decision = assets
            .policy
            .decide(&heard)
            .map_err(|e| EngineError::stage(Stage::Policy, e))?;
        let text = realize(&decision.das, &assets.templates, &assets.config.language)
            .map_err(|e| EngineError::stage(Stage::Nlg, e))?;
        let cues = cues_for(&decision.das, &assets.cues);
        let after = assets
            .tracker
            .note_system_turn(&heard, &decision.das, &text)
            .and_then(|s| s.with_phase(decision.next_phase))
            .map_err(|e| EngineError::stage(Stage::Dst, e))?;

        let record = TurnRecord {
            turn: after.turn_count,
            at_ms: self.now_ms(),
            customer_utterance: utterance,
            nlu_hypothesis: hypothesis,
            system_das: decision.das,
            system_utterance: text,
            cues,
            phase_before: before.phase,
            phase_after: after.phase,
            rationale: decision.rationale,
            latency_ms: if assets.config.fixed_clock {
                0
            } else {
                started.elapsed().as_millis() as u64
            },
        };
        if let Some(sink) = session.sink.as_mut() {
            let line = serde_json::to_string(&record).expect("records serialize");
            writeln!(sink, "{line}")?;
            sink.flush()?;
        }
        session.state = after;
        session.transcript.push(record.clone());
        tracing::debug!(
            session = %session.id,
            turn = record.turn,
            das = %serialize_da_list(&record.system_das),
            "turn"
        );
        Ok(record)
    }
}
