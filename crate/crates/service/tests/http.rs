use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use flowbot_core::config::{Assets, EngineConfig, ExternalNluConfig};
use flowbot_core::da::parse_das;
use flowbot_core::engine::{read_transcript, Engine, TurnRecord};
use flowbot_core::error::EngineError;
use flowbot_service::{router, ApiError};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn config(data_dir: Option<&Path>) -> EngineConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/engine.toml");
    let mut config = EngineConfig::load(path).unwrap();
    config.fixed_clock = true;
    config.data_dir = data_dir.map(Path::to_path_buf);
    config
}

fn app(config: EngineConfig) -> (Arc<Engine>, Router) {
    let engine = Arc::new(Engine::new(Arc::new(Assets::build(config).unwrap())));
    (engine.clone(), router(engine))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let request = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(body) => request
            .header("content-type", "application/json")
            .body(Body::from(body.to_string())),
        None => request.body(Body::empty()),
    }
    .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn intents(record: &Value) -> Vec<String> {
    let record: TurnRecord = serde_json::from_value(record.clone()).unwrap();
    record.system_intents().map(str::to_string).collect()
}

#[tokio::test]
async fn session_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(config(Some(dir.path())));

    let (status, created) = call(&app, "POST", "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = created["id"].as_str().unwrap().to_string();
    assert_eq!(intents(&created["greeting"]), ["welcome", "self_introduction"]);

    let (status, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(state["phase"], "ProfileGathering");

    let (status, record) = call(&app, "POST", &format!("/sessions/{id}/utterance"), Some(json!({"text": ""}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(intents(&record), ["request"]);

    let text = "I would like to bring my children to see the sights.";
    let (status, record) = call(&app, "POST", &format!("/sessions/{id}/utterance"), Some(json!({ "text": text }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(record["customer_utterance"], text);
    let (_, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["belief"]["user_accompany"], "child");

    let (status, _) = call(&app, "DELETE", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, body) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].as_str().unwrap().contains(&id));

    let transcript = read_transcript(dir.path().join(format!("{id}.jsonl"))).unwrap();
    assert_eq!(transcript.len(), 3);
    assert_eq!(transcript[2].customer_utterance, text);
}

#[tokio::test]
async fn unknown_sessions_are_not_found() {
    let (_, app) = app(config(None));
    for (method, uri, body) in [
        ("GET", "/sessions/nope/state", None),
        ("POST", "/sessions/nope/utterance", Some(json!({"text": "hi"}))),
        ("DELETE", "/sessions/nope", None),
        ("GET", "/sessions/nope/ws", None),
    ] {
        let (status, _) = call(&app, method, uri, body).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{method} {uri}");
    }
}

#[tokio::test]
async fn finished_session_is_gone() {
    let (engine, app) = app(config(None));
    let (_, created) = call(&app, "POST", "/sessions", None).await;
    let id = created["id"].as_str().unwrap();
    let record = engine.run_acts(id, parse_das("goodbye ()").unwrap()).unwrap();
    assert_eq!(record.system_intents().last(), Some("goodbye"));
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/utterance"), Some(json!({"text": "hello"}))).await;
    assert_eq!(status, StatusCode::GONE);
    assert_eq!(body["error"], "session is finished");
    let (status, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(state["phase"], "Done");
}

#[tokio::test]
async fn malformed_body_is_rejected() {
    let (_, app) = app(config(None));
    let (_, created) = call(&app, "POST", "/sessions", None).await;
    let id = created["id"].as_str().unwrap();
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/utterance"), Some(json!({"text": 5}))).await;
    assert!(status.is_client_error(), "{status}");
    let (_, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["turn_count"], 1);
}

/// Accepts one connection, holds it for `delay`, then answers with silence.
fn slow_nlu(delay: Duration) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/nlu", listener.local_addr().unwrap());
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.trim().is_empty() {
                    break;
                }
                if let Some((name, value)) = line.split_once(':') {
                    if name.eq_ignore_ascii_case("content-length") {
                        length = value.trim().parse().unwrap();
                    }
                }
            }
            reader.read_exact(&mut vec![0; length]).unwrap();
            std::thread::sleep(delay);
            let body = r#"{"da": ""}"#;
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    url
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_turn_is_busy() {
    let mut config = config(None);
    config.external_nlu = Some(ExternalNluConfig {
        endpoint: slow_nlu(Duration::from_millis(600)),
        timeout_ms: 5000,
    });
    let (_, app) = app(config);
    let (_, created) = call(&app, "POST", "/sessions", None).await;
    let id = created["id"].as_str().unwrap().to_string();

    let first = tokio::spawn({
        let app = app.clone();
        let uri = format!("/sessions/{id}/utterance");
        async move { call(&app, "POST", &uri, Some(json!({"text": "hello"}))).await }
    });
    tokio::time::sleep(Duration::from_millis(200)).await;
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/utterance"), Some(json!({"text": "hi"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"].as_str().unwrap().contains("busy"));
    let (status, _) = first.await.unwrap();
    assert_eq!(status, StatusCode::OK);
}

#[test]
fn error_statuses() {
    let cases = [
        (EngineError::UnknownSession("x".into()), StatusCode::NOT_FOUND),
        (EngineError::Busy("x".into()), StatusCode::CONFLICT),
        (EngineError::SessionDone, StatusCode::GONE),
        (EngineError::Config("x".into()), StatusCode::INTERNAL_SERVER_ERROR),
    ];
    for (error, status) in cases {
        assert_eq!(ApiError(error).status(), status);
    }
}
