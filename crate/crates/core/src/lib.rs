//! Task-oriented dialogue engine for recommending one of two tourist
//! attractions. Each customer turn flows through four stages:
//!
//! 1. [`nlu`] maps the utterance to customer dialogue acts,
//! 2. [`dst`] folds them into the dialogue state,
//! 3. [`policy`] picks the next system acts from the state and the
//!    attraction database,
//! 4. [`nlg`] renders those acts as text plus expression/motion cues.
//!
//! [`engine`] wires the stages into sessions, transcripts and the user
//! simulator. Dialogue acts and their ontology live in [`da`].

pub mod config;
pub mod da;
pub mod dst;
pub mod engine;
pub mod error;
pub mod nlg;
pub mod nlu;
pub mod policy;

#[cfg(test)]
pub(crate) mod testutil;
