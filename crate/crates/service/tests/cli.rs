use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use flowbot_core::config::{Assets, EngineConfig};
use flowbot_core::engine::Engine;
use flowbot_service::cli;

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config")
}

fn flowbot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowbot"))
        .args(args)
        .env_remove("DATA_DIR")
        .env("LOG_LEVEL", "error")
        .output()
        .unwrap()
}

fn path(name: &str) -> String {
    config_dir().join(name).display().to_string()
}

fn engine(config: EngineConfig) -> Engine {
    Engine::new(Arc::new(Assets::build(config).unwrap()))
}

#[test]
fn chat_shows_replies_and_cue_badges() {
    let mut config = EngineConfig::load(config_dir().join("engine.toml")).unwrap();
    config.fixed_clock = true;
    let engine = engine(config);
    let input = "\nMy name is Taro.\nI would like to bring my children to see the sights.\n";
    let mut out = Vec::new();
    cli::chat(&engine, input.as_bytes(), &mut out).unwrap();
    let out = String::from_utf8(out).unwrap();
    let replies: Vec<&str> = out.lines().filter(|l| l.contains("bot> ")).collect();
    assert_eq!(replies.len(), 4, "{out}");
    assert!(replies[0].contains("Welcome"), "{out}");
    assert!(out.contains("[good: during large_smile+nod]"), "{out}");
    assert_eq!(engine.session_count(), 0);
}

#[test]
fn replay_script_passes() {
    let out = flowbot(&[
        "simulate",
        "--config",
        &path("replay.toml"),
        "--script",
        &path("scripts/replay.toml"),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("recommend_target (attraction_name=Tokyo Trick Art Museum"), "{stdout}");
    assert!(stdout.contains("0 failures"), "{stdout}");
}

#[test]
fn failed_expectation_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("bad.toml");
    std::fs::write(&script, "[[steps]]\nsilence = true\nexpect = [\"goodbye\"]\n").unwrap();
    let out = flowbot(&[
        "simulate",
        "--config",
        &path("engine.toml"),
        "--script",
        script.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("expected [\"goodbye\"], got [\"request\"]"));
}

#[test]
fn seeded_random_customer_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let data = dir.path().join(sub);
        let out = flowbot(&[
            "--data-dir",
            data.to_str().unwrap(),
            "simulate",
            "--config",
            &path("replay.toml"),
            "--seed",
            "11",
            "--json",
        ]);
        assert!(out.status.success());
        let transcript = std::fs::read(data.join("session-0001.jsonl")).unwrap();
        (out.stdout, transcript)
    };
    let (first, first_file) = run("a");
    let (second, second_file) = run("b");
    assert_eq!(first, second);
    assert_eq!(first_file, second_file);
    let report: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["final_phase"], "Done");
}

#[test]
fn random_customer_needs_a_seed() {
    let out = flowbot(&["simulate", "--config", &path("engine.toml")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn check_passes_on_shipped_config() {
    for config in ["engine.toml", "replay.toml"] {
        let out = flowbot(&["check", "--config", &path(config)]);
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(out.status.success(), "{config}: {stdout}");
        assert!(stdout.contains("coverage gaps: 0"), "{stdout}");
    }
}

#[test]
fn check_reports_a_missing_template() {
    let dir = tempfile::tempdir().unwrap();
    let english = std::fs::read_to_string(config_dir().join("templates.en.toml")).unwrap();
    let trimmed = english.replace("[[goodbye]]\npattern = \"Goodbye.\"\nlanguage = \"en\"\n", "");
    assert_ne!(english, trimmed);
    let file = dir.path().join("templates.en.toml");
    std::fs::write(&file, trimmed).unwrap();
    let mut config = EngineConfig::load(config_dir().join("engine.toml")).unwrap();
    config.templates = vec![file, config_dir().join("templates.ja.toml")];
    let mut out = Vec::new();
    let ok = cli::check(&Assets::build(config).unwrap(), &mut out).unwrap();
    let out = String::from_utf8(out).unwrap();
    assert!(!ok);
    assert!(out.contains("missing template: goodbye () [en]"), "{out}");
    assert!(out.contains("coverage gaps: 1"), "{out}");
}

#[test]
fn bad_config_is_an_error() {
    let out = flowbot(&["check", "--config", "/nonexistent/engine.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/engine.toml"));
}
