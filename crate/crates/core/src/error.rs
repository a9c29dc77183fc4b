use std::fmt;

use thiserror::Error;

use crate::da::ValidationReport;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OntologyError {
    #[error("cannot read ontology {0}: {1}")]
    Io(String, String),
    #[error("malformed ontology document: {0}")]
    Format(String),
    #[error("invalid name `{0}` (letters, digits, `_` and `-` only)")]
    BadName(String),
    #[error("duplicate intent `{0}`")]
    DuplicateIntent(String),
    #[error("duplicate slot `{0}`")]
    DuplicateSlot(String),
    #[error("categorical slot `{0}` has no allowed values")]
    EmptyCategorical(String),
    #[error("string slot `{0}` must not declare allowed values")]
    ValuesOnStringSlot(String),
    #[error("slot `{0}` lists value `{1}` twice")]
    DuplicateValue(String, String),
    #[error("slot `{0}` has unrepresentable value `{1}`")]
    BadValue(String, String),
    #[error("intent `{0}` references undeclared slot `{1}`")]
    UndeclaredSlot(String, String),
    #[error("extension redeclares intent `{0}` with a different speaker")]
    SpeakerConflict(String),
}

/// A grammar violation in a dialogue-act string. `position` is a byte offset.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {position}: expected {expected}, found {found}")]
pub struct SyntaxError {
    pub position: usize,
    pub expected: &'static str,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DaError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("dialogue act #{index} is invalid: {report}")]
    Validation { index: usize, report: ValidationReport },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("enumeration would exceed the ceiling of {ceiling} dialogue acts")]
pub struct CapacityError {
    pub ceiling: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NluError {
    #[error("cannot read {0}: {1}")]
    Io(String, String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error("lexicon entry #{entry}: {message}")]
    Lexicon { entry: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("intent `{intent}` cannot be produced by the {speaker}")]
    WrongSpeaker { intent: String, speaker: crate::da::Speaker },
    #[error("illegal phase transition {from:?} -> {to:?}")]
    PhaseTransition {
        from: crate::dst::FlowPhase,
        to: crate::dst::FlowPhase,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("the session is over")]
    SessionOver,
    #[error("attraction database is invalid: {0}")]
    Database(String),
    #[error("policy produced an invalid system act `{da}`: {report}")]
    InvalidAct { da: String, report: ValidationReport },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NlgError {
    #[error("no template for ({intent}, {{{}}}) in language `{language}`", slots.join(", "))]
    TemplateMiss {
        intent: String,
        slots: Vec<String>,
        language: String,
    },
    #[error("cannot read {0}: {1}")]
    Io(String, String),
    #[error("malformed {0}: {1}")]
    Format(String, String),
    #[error("template for `{intent}` uses placeholder `{placeholder}` outside its slot set")]
    StrayPlaceholder { intent: String, placeholder: String },
    #[error("duplicate template for ({intent}, {{{}}}) in language `{language}`", slots.join(", "))]
    DuplicateTemplate {
        intent: String,
        slots: Vec<String>,
        language: String,
    },
    #[error("no cue rule for system intent `{0}`")]
    MissingCue(String),
}

/// Pipeline stage a turn failed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Nlu,
    Dst,
    Policy,
    Nlg,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Nlu => "nlu",
            Stage::Dst => "dst",
            Stage::Policy => "policy",
            Stage::Nlg => "nlg",
        })
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("session is finished")]
    SessionDone,
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session `{0}` is busy with another turn")]
    Busy(String),
    #[error("{stage} stage failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transcript i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl EngineError {
    pub fn stage(stage: Stage, err: impl fmt::Display) -> Self {
        EngineError::Stage {
            stage,
            message: err.to_string(),
        }
    }
}
