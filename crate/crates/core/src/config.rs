//! Engine configuration and the shared, read-only assets built from it.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::da::Ontology;
use crate::dst::{Tracker, TrackerConfig};
use crate::error::EngineError;
use crate::nlg::{CueRules, TemplateSet};
use crate::nlu::{load_corpus, CorpusPair, ExternalNlu, Lexicon, Nlu, Understand};
use crate::policy::{AttractionDb, Policy, PolicyConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalNluConfig {
    pub endpoint: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    2000
}

fn default_language() -> String {
    "en".to_string()
}

/// Contents of an engine configuration file. Relative paths are resolved
/// against the directory of that file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Base ontology first, then extensions.
    pub ontology: Vec<PathBuf>,
    pub lexicon: PathBuf,
    pub corpus: PathBuf,
    pub attractions: PathBuf,
    pub templates: Vec<PathBuf>,
    pub cues: PathBuf,
    #[serde(default = "default_language")]
    pub language: String,
    /// Where transcripts are written. `None` keeps them in memory only.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    /// Record every timestamp and latency as zero.
    #[serde(default)]
    pub fixed_clock: bool,
    /// Derive session ids from a counter and seed the simulator with this value.
    #[serde(default)]
    pub fixed_seed: Option<u64>,
    #[serde(default = "TrackerConfig::standard")]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub external_nlu: Option<ExternalNluConfig>,
}

impl EngineConfig {
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self, EngineError> {
        let mut config: EngineConfig = toml::from_str(text).map_err(|e| EngineError::Config(e.to_string()))?;
        config.resolve(base);
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EngineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.ontology.iter_mut().for_each(join);
        self.templates.iter_mut().for_each(join);
        join(&mut self.lexicon);
        join(&mut self.corpus);
        join(&mut self.attractions);
        join(&mut self.cues);
        if let Some(dir) = &mut self.data_dir {
            join(dir);
        }
    }
}

/// Everything a turn needs, loaded once and shared by all sessions.
pub struct Assets {
    pub config: EngineConfig,
    pub ontology: Arc<Ontology>,
    pub corpus: Vec<CorpusPair>,
    pub nlu: Arc<dyn Understand>,
    pub tracker: Tracker,
    pub policy: Policy,
    pub templates: TemplateSet,
    pub cues: CueRules,
}

impl std::fmt::Debug for Assets {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Assets").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Assets {
    pub fn build(config: EngineConfig) -> Result<Self, EngineError> {
        let cfg = |e: &dyn std::fmt::Display| EngineError::Config(e.to_string());
        let ontology = Arc::new(Ontology::load_layered(&config.ontology).map_err(|e| cfg(&e))?);
        let lexicon = Lexicon::load(&config.lexicon, &ontology).map_err(|e| cfg(&e))?;
        let corpus = load_corpus(&config.corpus, &ontology).map_err(|e| cfg(&e))?;
        let db = Arc::new(AttractionDb::load(&config.attractions, &ontology).map_err(|e| cfg(&e))?);
        let templates = TemplateSet::load(&config.templates).map_err(|e| cfg(&e))?;
        if templates.get("welcome", &Default::default(), &config.language).is_none() {
            return Err(EngineError::Config(format!(
                "no templates for language `{}`",
                config.language
            )));
        }
        let cues = CueRules::load(&config.cues, &ontology).map_err(|e| cfg(&e))?;

        let mut tracker_config = config.tracker.clone();
        if tracker_config.known_attractions.is_empty() {
            tracker_config.known_attractions = db.names();
        }
        let tracker = Tracker::new(ontology.clone(), tracker_config);
        let policy = Policy::new(ontology.clone(), db, config.policy.clone()).map_err(|e| cfg(&e))?;

        let local: Arc<dyn Understand> = Arc::new(Nlu::new(ontology.clone(), lexicon, &corpus));
        let nlu: Arc<dyn Understand> = match &config.external_nlu {
            Some(ext) => Arc::new(ExternalNlu::new(
                ext.endpoint.clone(),
                Duration::from_millis(ext.timeout_ms),
                ontology.clone(),
                local,
            )),
            None => local,
        };
        Ok(Assets {
            config,
            ontology,
            corpus,
            nlu,
            tracker,
            policy,
            templates,
            cues,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EngineError> {
        Self::build(EngineConfig::load(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::config_dir;

    #[test]
    fn shipped_config_loads() {
        let assets = Assets::load(config_dir().join("engine.toml")).unwrap();
        assert_eq!(assets.config.language, "en");
        assert_eq!(assets.policy.db().attractions().len(), 2);
        assert_eq!(assets.tracker.config().known_attractions.len(), 2);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let config = EngineConfig::from_toml_str(
            r#"
            ontology = ["a.toml", "/abs/b.toml"]
            lexicon = "lex.toml"
            corpus = "c.tsv"
            attractions = "db.toml"
            templates = ["t.toml"]
            cues = "cues.toml"
            data_dir = "out"
            "#,
            Path::new("/etc/bot"),
        )
        .unwrap();
        assert_eq!(config.ontology[0], PathBuf::from("/etc/bot/a.toml"));
        assert_eq!(config.ontology[1], PathBuf::from("/abs/b.toml"));
        assert_eq!(config.data_dir, Some(PathBuf::from("/etc/bot/out")));
        assert_eq!(config.tracker, TrackerConfig::standard());
        assert_eq!(config.policy, PolicyConfig::default());
        assert!(!config.fixed_clock);
    }

    #[test]
    fn unknown_language_is_rejected() {
        let mut config = EngineConfig::load(config_dir().join("engine.toml")).unwrap();
        config.language = "fr".into();
        assert!(matches!(Assets::build(config), Err(EngineError::Config(_))));
    }
}
