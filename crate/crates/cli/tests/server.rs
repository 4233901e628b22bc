use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use stabsim::server::{router, AppState};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let v = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, v)
}

async fn new_session(app: &axum::Router, seed: u64) -> String {
    let (st, v) = call(app, "POST", "/api/session", Some(json!({"seed": seed}))).await;
    assert_eq!(st, StatusCode::OK);
    v["id"].as_str().unwrap().to_string()
}

fn star_op() -> Value {
    json!({"op": "new_cluster", "args": {"n": 4, "edges": [[1, 2], [1, 3], [1, 4]]}})
}

#[tokio::test]
async fn unknown_session_is_404() {
    let app = router(AppState::new(8, 0));
    let (st, _) = call(&app, "GET", "/api/session/nope", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = call(&app, "POST", "/api/session/nope/op", Some(star_op())).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn choice_flow_and_conflicts() {
    let app = router(AppState::new(8, 0));
    let id = new_session(&app, 1).await;
    let op = format!("/api/session/{id}/op");
    let (st, _) = call(&app, "POST", &op, Some(star_op())).await;
    assert_eq!(st, StatusCode::OK);

    let m = json!({"op": "measure", "args": {"qubit": 1, "basis": "X", "outcome": null, "choice": null}});
    let (st, v) = call(&app, "POST", &op, Some(m.clone())).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["status"], "needs_choice");
    assert_eq!(v["choices"], json!([[2], [3], [4]]));

    // a second op while the choice is open
    let (st, v) = call(&app, "POST", &op, Some(m)).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["status"], "error");
    assert!(v["snapshot"]["pending"].is_object());

    let (st, _) = call(
        &app,
        "POST",
        &format!("/api/session/{id}/choice"),
        Some(json!({"index": 9})),
    )
    .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, v) = call(
        &app,
        "POST",
        &format!("/api/session/{id}/choice"),
        Some(json!({"index": 2})),
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["record"]["hadamards"], json!([4]));
    assert_eq!(v["snapshot"]["consistent"], true);

    let (st, _) = call(
        &app,
        "POST",
        &format!("/api/session/{id}/choice"),
        Some(json!({"index": 0})),
    )
    .await;
    assert_eq!(st, StatusCode::CONFLICT);
}

#[tokio::test]
async fn malformed_requests_are_400() {
    let app = router(AppState::new(8, 0));
    let id = new_session(&app, 0).await;
    let op = format!("/api/session/{id}/op");
    let (st, _) = call(&app, "POST", &op, Some(json!({"op": "teleport"}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    // no cluster yet
    let (st, v) = call(&app, "POST", &op, Some(json!({"op": "lc", "args": {"qubit": 1}}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert!(v["message"].as_str().unwrap().contains("no cluster"));
    call(&app, "POST", &op, Some(star_op())).await;
    let (st, _) = call(&app, "POST", &op, Some(json!({"op": "lc", "args": {"qubit": 9}}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = call(&app, "GET", &format!("/api/session/{id}/export?format=png"), None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = call(&app, "POST", "/api/lo/kraus", Some(json!({"builder": "nonsense"}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn sessions_are_isolated() {
    let app = router(AppState::new(8, 0));
    let a = new_session(&app, 5).await;
    let b = new_session(&app, 5).await;
    assert_ne!(a, b);
    let line = json!({"op": "new_cluster", "args": {"n": 5, "edges": [[1, 2], [2, 3], [3, 4], [4, 5]]}});
    let z3 = json!({"op": "measure", "args": {"qubit": 3, "basis": "Z", "outcome": null, "choice": null}});
    let (ua, ub) = (format!("/api/session/{a}/op"), format!("/api/session/{b}/op"));
    let (ra, rb) = tokio::join!(
        call(&app, "POST", &ua, Some(line.clone())),
        call(&app, "POST", &ub, Some(star_op())),
    );
    assert_eq!((ra.0, rb.0), (StatusCode::OK, StatusCode::OK));
    let (st, v) = call(&app, "POST", &format!("/api/session/{a}/op"), Some(z3)).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["snapshot"]["components"], json!([[1, 2], [4, 5]]));

    let (_, vb) = call(&app, "GET", &format!("/api/session/{b}"), None).await;
    assert_eq!(vb["n"], 4);
    assert_eq!(vb["history_len"], 1);
    assert_eq!(vb["graph"]["edges"], json!([[1, 2], [1, 3], [1, 4]]));

    let (st, v) = call(&app, "POST", &format!("/api/session/{a}/undo"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["snapshot"]["components"], json!([[1, 2, 3, 4, 5]]));
}

#[tokio::test]
async fn lru_evicts_oldest_session() {
    let app = router(AppState::new(2, 0));
    let first = new_session(&app, 0).await;
    new_session(&app, 0).await;
    new_session(&app, 0).await;
    let (st, _) = call(&app, "GET", &format!("/api/session/{first}"), None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn export_and_kraus_endpoints() {
    let app = router(AppState::new(8, 0));
    let id = new_session(&app, 0).await;
    call(&app, "POST", &format!("/api/session/{id}/op"), Some(star_op())).await;
    let (st, v) = call(&app, "GET", &format!("/api/session/{id}/export?format=dot"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert!(v.as_str().unwrap().contains("1 -- 2;"));
    let (st, v) = call(&app, "GET", &format!("/api/session/{id}/export"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["edges"], json!([[1, 2], [1, 3], [1, 4]]));

    let (st, v) = call(&app, "POST", "/api/lo/kraus", Some(json!({"builder": "type2"}))).await;
    assert_eq!(st, StatusCode::OK);
    assert!(v["completeness_error"].as_f64().unwrap() < 1e-9);
    assert!((v["success_probability_plus"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}
