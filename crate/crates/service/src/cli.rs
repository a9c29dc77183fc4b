//! The `chat`, `simulate` and `check` commands, written against plain
//! readers and writers so they can be driven from tests.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use flowbot_core::config::{Assets, EngineConfig};
use flowbot_core::dst::FlowPhase;
use flowbot_core::engine::{reachable_system_keys, Engine, ExploreOptions, SimScript, TurnRecord, UserSimulator};
use flowbot_core::nlg::{coverage_check, Cue, Gesture};

/// Loads a configuration file, redirecting transcripts to `data_dir` when given.
pub fn load_config(path: &Path, data_dir: Option<PathBuf>) -> anyhow::Result<EngineConfig> {
    let mut config = EngineConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if data_dir.is_some() {
        config.data_dir = data_dir;
    }
    Ok(config)
}

fn label<T: serde::Serialize>(value: T) -> String {
    serde_json::to_value(value)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn gesture(g: Gesture) -> String {
    format!("{}+{}", label(g.expression), label(g.motion))
}

/// Non-neutral cues as `intent: during/after` badges.
pub fn cue_badges(cues: &[Cue]) -> String {
    cues.iter()
        .filter(|c| c.during != Gesture::NEUTRAL || c.after != Gesture::NEUTRAL)
        .map(|c| {
            let mut parts = Vec::new();
            if c.during != Gesture::NEUTRAL {
                parts.push(format!("during {}", gesture(c.during)));
            }
            if c.after != Gesture::NEUTRAL {
                parts.push(format!("after {}", gesture(c.after)));
            }
            format!("[{}: {}]", c.intent, parts.join(", "))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn print_reply(out: &mut impl Write, record: &TurnRecord) -> std::io::Result<()> {
    let badges = cue_badges(&record.cues);
    if badges.is_empty() {
        writeln!(out, "bot> {}", record.system_utterance)
    } else {
        writeln!(out, "bot> {}  {badges}", record.system_utterance)
    }
}

/// Terminal conversation: one customer turn per input line, an empty line
/// is silence. Ends when the dialogue does or the input runs out.
pub fn chat(engine: &Engine, input: impl BufRead, out: &mut impl Write) -> anyhow::Result<()> {
    let id = engine.open_session()?;
    let mut record = engine.run_turn(&id, "")?;
    print_reply(out, &record)?;
    let mut lines = input.lines();
    while record.phase_after != FlowPhase::Done {
        write!(out, "you> ")?;
        out.flush()?;
        let Some(line) = lines.next() else {
            writeln!(out)?;
            break;
        };
        record = engine.run_turn(&id, line?.trim())?;
        print_reply(out, &record)?;
    }
    engine.close_session(&id)?;
    Ok(())
}

/// Runs a script file, or a random customer of `steps` turns seeded from the
/// configuration, and reports per-step intents. Returns whether every
/// expectation held.
pub fn simulate(
    engine: &Engine,
    script: Option<&Path>,
    steps: usize,
    json: bool,
    out: &mut impl Write,
) -> anyhow::Result<bool> {
    let assets = engine.assets();
    let script = match script {
        Some(path) => SimScript::load(path, &assets.ontology)?,
        None => {
            let Some(seed) = assets.config.fixed_seed else {
                bail!("give --script, or --seed for a random customer");
            };
            UserSimulator::new(assets)?.script(seed, steps)
        }
    };
    let report = engine.simulate(&script)?;
    if json {
        serde_json::to_writer_pretty(&mut *out, &report)?;
        writeln!(out)?;
        return Ok(report.passed());
    }
    writeln!(out, "session {}", report.session_id)?;
    writeln!(out, "greeting: {}", report.greeting.join(", "))?;
    for (n, step) in report.steps.iter().enumerate() {
        writeln!(out, "{:>3} {} -> {}", n + 1, step.input, step.system_das)?;
    }
    for f in &report.failures {
        match &f.actual {
            Some(actual) => writeln!(out, "step {}: expected {:?}, got {:?}", f.step, f.expected, actual)?,
            None => writeln!(out, "step {}: expected {:?}, dialogue already over", f.step, f.expected)?,
        }
    }
    writeln!(
        out,
        "final phase {:?} after {} turns, {} skipped, {} failures",
        report.final_phase,
        report.turn_count,
        report.skipped,
        report.failures.len()
    )?;
    Ok(report.passed())
}

/// Validates the configuration: every act the policy can emit needs a
/// template in every language that has templates. Loading the assets has
/// already checked the ontology, lexicon, corpus, database and cue rules.
pub fn check(assets: &Assets, out: &mut impl Write) -> anyhow::Result<bool> {
    let languages = assets.templates.languages();
    writeln!(
        out,
        "ontology: {} intents, {} slots",
        assets.ontology.intents().len(),
        assets.ontology.slots().len()
    )?;
    writeln!(
        out,
        "templates: {} across {}",
        assets.templates.len(),
        languages.iter().cloned().collect::<Vec<_>>().join(", ")
    )?;
    let keys = reachable_system_keys(assets, &ExploreOptions::standard(assets))?;
    writeln!(out, "reachable system acts: {}", keys.len())?;
    let report = coverage_check(&assets.templates, &keys, &languages);
    for gap in &report.gaps {
        let slots: Vec<&str> = gap.slots.iter().map(String::as_str).collect();
        writeln!(out, "missing template: {} ({}) [{}]", gap.intent, slots.join(", "), gap.language)?;
    }
    writeln!(out, "coverage gaps: {}", report.gaps.len())?;
    Ok(report.is_empty())
}
