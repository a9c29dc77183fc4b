use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{NluHypothesis, NluSource, Understand};
use crate::da::{parse_das, validate_all, Ontology, Speaker};
use crate::dst::DialogueState;

/// Turns of context sent along with the utterance.
const HISTORY_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalRequest {
    pub utterance: String,
    pub history: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalResponse {
    pub da: String,
}

/// Client for a generative NLU service. Any transport, decoding or
/// validation failure degrades to the local understander.
pub struct ExternalNlu {
    endpoint: String,
    agent: ureq::Agent,
    ontology: Arc<Ontology>,
    fallback: Arc<dyn Understand>,
    failures: AtomicU64,
}

impl ExternalNlu {
    pub fn new(
        endpoint: impl Into<String>,
        timeout: Duration,
        ontology: Arc<Ontology>,
        fallback: Arc<dyn Understand>,
    ) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(true)
            .build()
            .into();
        ExternalNlu {
            endpoint: endpoint.into(),
            agent,
            ontology,
            fallback,
            failures: AtomicU64::new(0),
        }
    }

    /// Number of calls that fell back to the local understander.
    pub fn failures(&self) -> u64 {
        self.failures.load(Ordering::Relaxed)
    }

    fn context(state: &DialogueState) -> Vec<String> {
        let skip = state.history.len().saturating_sub(HISTORY_WINDOW);
        state
            .history
            .iter()
            .skip(skip)
            .map(|e| format!("{}: {}", e.speaker, e.utterance))
            .collect()
    }

    fn call(&self, utterance: &str, state: &DialogueState) -> Result<NluHypothesis, String> {
        let request = ExternalRequest {
            utterance: utterance.to_string(),
            history: Self::context(state),
        };
        let response: ExternalResponse = self
            .agent
            .post(&self.endpoint)
            .send_json(&request)
            .map_err(|e| e.to_string())?
            .body_mut()
            .read_json()
            .map_err(|e| e.to_string())?;
        let das = if response.da.trim().is_empty() {
            Vec::new()
        } else {
            parse_das(&response.da).map_err(|e| e.to_string())?
        };
        validate_all(&das, &self.ontology, Some(Speaker::Customer)).map_err(|e| e.to_string())?;
        Ok(NluHypothesis {
            score: das.len() as u32,
            das,
            source: NluSource::External,
        })
    }
}

impl Understand for ExternalNlu {
    fn understand(&self, utterance: &str, state: &DialogueState) -> NluHypothesis {
        match self.call(utterance, state) {
            Ok(h) => h,
            Err(err) => {
                self.failures.fetch_add(1, Ordering::Relaxed);
                tracing::warn!(endpoint = %self.endpoint, error = %err, "external NLU failed, using lexicon");
                self.fallback.understand(utterance, state)
            }
        }
    }
}
