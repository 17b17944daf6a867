use std::num::NonZeroUsize;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use inquiry_core::Engine;
use inquiry_service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app_with(capacity: usize, limit: usize) -> Router {
    let state = Arc::new(AppState::new(Engine::offline(), NonZeroUsize::new(capacity).unwrap()));
    router(state, limit)
}

fn app() -> Router {
    app_with(16, 64 * 1024)
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, v)
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    send(app, "POST", uri, Some(body.to_string())).await
}

fn ctx(attempt: &str, target: &str, sentence: &str) -> Value {
    let start = sentence.find(attempt).unwrap();
    json!({
        "attempt": attempt,
        "target": target,
        "sentence": sentence,
        "document_excerpt": sentence,
        "span": [start, start + attempt.chars().count()],
    })
}

#[tokio::test]
async fn check_flags_misspelling() {
    let app = app();
    let (s, v) = post(&app, "/check", json!({"document": "I like how the art of constractd."})).await;
    assert_eq!(s, StatusCode::OK);
    let contexts = v["contexts"].as_array().unwrap();
    assert_eq!(contexts.len(), 1);
    assert_eq!(contexts[0]["target"], "constructed");

    let (s, v) = post(&app, "/check", json!({"document": "The builder made a house."})).await;
    assert_eq!(s, StatusCode::OK);
    assert!(v["contexts"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn check_rejects_empty_and_oversized() {
    let app = app_with(4, 256);
    let (s, v) = post(&app, "/check", json!({"document": "   "})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "empty_document");
    let (s, _) = post(&app, "/check", json!({"document": "word ".repeat(200)})).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
    let (s, _) = send(&app, "POST", "/check", Some("{not json".into())).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn inquiry_errors() {
    let app = app();
    let (s, v) = post(&app, "/inquiry", ctx("reach", "reach", "Can you reach it?")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "no_legal_trace");
    let (s, v) = post(&app, "/inquiry", ctx("blorp", "blorpx", "A blorp here.")).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert_eq!(v["error"], "unknown_word");
}

#[tokio::test]
async fn reeching_plan_starts_with_meaning_or_graphemes() {
    let app = app();
    let (s, plan) = post(&app, "/inquiry", ctx("reeching", "reaching", "She was reeching for the book.")).await;
    assert_eq!(s, StatusCode::OK);
    let entry = plan["entry"].as_str().unwrap();
    let h = plan["nodes"][entry]["hypothesis"].as_str().unwrap();
    assert!(h == "H1" || h == "H8", "{h}");
    let id = plan["plan_id"].as_str().unwrap();
    let (s, again) = send(&app, "GET", &format!("/plan/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(again, plan);
}

#[tokio::test]
async fn scenario_session() {
    let app = app();
    let (_, plan) = post(&app, "/inquiry", ctx("constractd", "constructed", "I like how the art of constractd.")).await;
    let (s, view) = post(&app, "/session", json!({"plan_id": plan["plan_id"]})).await;
    assert_eq!(s, StatusCode::OK);
    let sid = view["session_id"].as_str().unwrap().to_string();
    let step = |node: &str, payload: Value| json!({"node_id": node, "payload": payload});
    let uri = format!("/session/{sid}/step");

    let (s, v) = post(&app, &uri, step("h2", json!({"text": "x"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "wrong_node");
    let (s, v) = post(&app, &uri, step("h1", json!({"span": {"start": 0, "end": 1}}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "affordance_mismatch");
    let (s, _) = post(&app, &uri, json!({"node_id": "h1", "payload": {"colour": 1}})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, v) = post(&app, &uri, step("h1", json!({"text": "The builder constructed the building."}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["current"]["affordance"], "highlight_span");
    let (_, v) = post(&app, &uri, step("h2", json!({"span": {"start": 3, "end": 9}}))).await;
    assert_eq!(v["current"]["affordance"], "reveal_animation");
    let (_, v) = post(&app, &uri, step("h3", json!("ack"))).await;
    assert_eq!(v["current"]["affordance"], "free_text");
    let (_, v) = post(&app, &uri, step("h4", json!({"text": "structure, insstruct"}))).await;
    assert_eq!(v["current"]["node_id"], "end");
    let (_, v) = post(&app, &uri, step("end", json!("ack"))).await;
    assert_eq!(v["finished"], true);
    let kinds: Vec<&str> = v["transcript"].as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert!(kinds.contains(&"revealed"));
    assert_eq!(kinds.last(), Some(&"finished"));

    let (s, v) = post(&app, &uri, step("end", json!("ack"))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "session_finished");
}

#[tokio::test]
async fn unknown_sessions_and_plans() {
    let app = app();
    let (s, _) = post(&app, "/session/s999/step", json!({"node_id": "h1", "payload": "ack"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = send(&app, "GET", "/session/s999", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = post(&app, "/session", json!({"plan_id": "nope"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = post(&app, "/session", json!({})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn store_evicts_least_recent_session() {
    let app = app_with(1, 64 * 1024);
    let (_, plan) = post(&app, "/inquiry", ctx("alot", "a lot", "I like it alot.")).await;
    let (_, a) = post(&app, "/session", json!({"plan_id": plan["plan_id"]})).await;
    let (_, b) = post(&app, "/session", json!({"plan": plan})).await;
    let (s, _) = send(&app, "GET", &format!("/session/{}", a["session_id"].as_str().unwrap()), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = send(&app, "GET", &format!("/session/{}", b["session_id"].as_str().unwrap()), None).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn invalid_inline_plan_is_rejected() {
    let app = app();
    let (_, mut plan) = post(&app, "/inquiry", ctx("alot", "a lot", "I like it alot.")).await;
    plan["entry"] = json!("h9");
    let (s, v) = post(&app, "/session", json!({"plan": plan})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "invalid_plan");
}
