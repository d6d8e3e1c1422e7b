use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use streetbase_core::engine::Engine;
use streetbase_core::model::names::*;
use streetbase_core::{demo, Config};
use streetbase_service::api::{router, AppState};
use tower::ServiceExt;

fn app() -> (Router, Arc<Engine>) {
    let engine = Arc::new(Engine::new(demo::build(Config::default()).unwrap()));
    (router(AppState::new(engine.clone())), engine)
}

async fn call(app: &Router, method: Method, uri: &str, session: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(s) = session {
        req = req.header("x-session", s);
    }
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

fn node(x: f64, y: f64) -> Value {
    json!({"type": "Feature", "geometry": {"type": "Point", "coordinates": [x, y]}, "properties": {}})
}

fn edge(a: [f64; 2], b: [f64; 2]) -> Value {
    json!({
        "type": "Feature",
        "geometry": {"type": "LineString", "coordinates": [a, b]},
        "properties": {"width": 8.0, "lane_count": 2}
    })
}

#[tokio::test]
async fn layers_describe_kind_and_writability() {
    let (app, _) = app();
    let (status, v) = call(&app, Method::GET, "/layers", None, None).await;
    assert_eq!(status, StatusCode::OK);
    let layers = v.as_array().unwrap();
    let find = |n: &str| layers.iter().find(|l| l["name"] == n).unwrap_or_else(|| panic!("{n} missing")).clone();
    assert_eq!(find(EDIT_EDGE)["kind"], "view");
    assert_eq!(find(EDIT_EDGE)["writable"], true);
    assert_eq!(find(ROAD_AXIS)["kind"], "layer");
    assert_eq!(find(SECTION_SURFACE)["writable"], false);
    assert_eq!(find(LANE_MERGED)["kind"], "merged");
    assert_eq!(find("conflicts")["kind"], "derived");
}

#[tokio::test]
async fn insert_update_delete_through_views() {
    let (app, engine) = app();
    for x in [500.0, 600.0] {
        let (status, _) = call(&app, Method::POST, "/layers/edit_node/features", None, Some(node(x, 0.0))).await;
        assert_eq!(status, StatusCode::CREATED);
    }
    let before = engine.read(|s| s.read(ROAD_AXIS).unwrap().len());
    let (status, v) = call(&app, Method::POST, "/layers/edit_edge/features", None, Some(edge([500.0, 0.0], [600.0, 0.0]))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    let id = v["id"].as_u64().unwrap();
    let changes = v["changes"].as_array().unwrap();
    assert_eq!(changes[0]["layer"], EDIT_EDGE);
    assert_eq!(changes[0]["kind"], "insert");
    assert_eq!(changes[0]["origin"], "user:anonymous");
    assert!(changes.iter().any(|c| c["layer"] == SECTION_SURFACE));
    assert!(changes.iter().skip(1).all(|c| c["origin"] == "system"));
    let seqs: Vec<u64> = changes.iter().map(|c| c["seq"].as_u64().unwrap()).collect();
    assert!(seqs.windows(2).all(|w| w[1] == w[0] + 1));
    assert_eq!(engine.read(|s| s.read(ROAD_AXIS).unwrap().len()), before + 1);

    let (status, f) = call(&app, Method::GET, &format!("/layers/road_axis/features/{id}"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(f["properties"]["width"], 8.0);

    let mut wider = edge([500.0, 0.0], [600.0, 0.0]);
    wider["properties"]["width"] = json!(14.0);
    let (status, v) = call(&app, Method::PUT, &format!("/layers/edit_edge/features/{id}"), None, Some(wider)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let (_, f) = call(&app, Method::GET, &format!("/layers/road_axis/features/{id}"), None, None).await;
    assert_eq!(f["properties"]["width"], 14.0);

    let (status, _) = call(&app, Method::DELETE, &format!("/layers/edit_edge/features/{id}"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(engine.read(|s| s.read(ROAD_AXIS).unwrap().len()), before);
    assert!(engine.check().is_empty());
}

#[tokio::test]
async fn bbox_query_returns_only_intersecting_rows() {
    let (app, _) = app();
    let (status, v) = call(&app, Method::GET, "/layers/road_node/features?bbox=-1,-1,1,1", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["type"], "FeatureCollection");
    assert_eq!(v["features"].as_array().unwrap().len(), 1);
    let (_, all) = call(&app, Method::GET, "/layers/road_node/features", None, None).await;
    assert_eq!(all["features"].as_array().unwrap().len(), demo::COLUMNS * demo::ROWS);
    let (status, e) = call(&app, Method::GET, "/layers/road_node/features?bbox=1,2,3", None, None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(e["code"], "bad_request");
}

#[tokio::test]
async fn errors_carry_codes_and_statuses() {
    let (app, _) = app();
    let (status, e) = call(&app, Method::GET, "/layers/nowhere/features", None, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(e["code"], "not_found");

    let (status, e) = call(&app, Method::GET, "/layers/road_axis/features/999999", None, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(e["feature"], 999999);

    // Generated layers cannot be written directly.
    let (status, e) = call(&app, Method::POST, "/layers/section_surface/features", None, Some(node(0.0, 0.0))).await;
    assert!(status.is_client_error(), "{status}");
    assert!(e["code"].is_string() && e["message"].is_string());

    // A node placed on an existing node is a duplicate.
    let (status, e) = call(&app, Method::POST, "/layers/edit_node/features", None, Some(node(0.1, 0.0))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{e}");
    assert_eq!(e["layer"], EDIT_NODE);

    let (status, e) = call(&app, Method::POST, "/layers/edit_node/features", None, Some(json!({"type": "Point"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["code"], "validation");

    let req = Request::post("/layers/edit_node/features").body(Body::from("{not json")).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn sessions_attribute_edits() {
    let (app, _) = app();
    let (status, s) = call(&app, Method::POST, "/sessions", None, Some(json!({"name": "alice"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(s["user_id"], "alice@local");
    let token = s["token"].as_str().unwrap().to_string();
    let (_, v) = call(&app, Method::POST, "/layers/edit_node/features", Some(&token), Some(node(900.0, 900.0))).await;
    assert_eq!(v["changes"][0]["origin"], "user:alice@local");

    let (status, e) = call(&app, Method::POST, "/layers/edit_node/features", Some("bogus"), Some(node(950.0, 950.0))).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(e["code"], "unknown_session");

    let (status, _) = call(&app, Method::POST, "/sessions", None, Some(json!({"name": "a@b"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn extents_are_queued_and_conflicts_derived() {
    let (app, engine) = app();
    let (_, a) = call(&app, Method::POST, "/sessions", None, Some(json!({"name": "alice"}))).await;
    let (_, b) = call(&app, Method::POST, "/sessions", None, Some(json!({"name": "bob"}))).await;
    let (a, b) = (a["token"].as_str().unwrap().to_string(), b["token"].as_str().unwrap().to_string());

    let (status, e) = call(&app, Method::POST, "/extents", None, Some(json!({"bbox": [0, 0, 10, 10], "scale": 500}))).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED, "{e}");

    let now = 1_000_000_i64;
    for (token, t) in [(&a, now), (&b, now + 1_000)] {
        let body = json!({"bbox": [0, 0, 120, 80], "scale": 800, "t": t});
        let (status, v) = call(&app, Method::POST, "/extents", Some(token), Some(body)).await;
        assert_eq!(status, StatusCode::ACCEPTED);
        assert_eq!(v["queued"], true);
    }
    let (_, v) = call(&app, Method::POST, "/extents", Some(&a), Some(json!({"bbox": [0, 0, 1, 1], "scale": 90_000}))).await;
    assert_eq!(v["queued"], false);

    // Wait for the recorder to commit both extents.
    for _ in 0..200 {
        if engine.read(|s| s.read("screen_extent").unwrap().len()) == 2 {
            break;
        }
        tokio::time::sleep(std::time::Duration::from_millis(10)).await;
    }
    let (status, c) = call(&app, Method::GET, "/conflicts", None, None).await;
    assert_eq!(status, StatusCode::OK);
    let rows = c["features"].as_array().unwrap();
    assert_eq!(rows.len(), 1, "{c}");
    assert_eq!(rows[0]["properties"]["kind"], "concurrent");
    let users = [rows[0]["properties"]["user_a"].clone(), rows[0]["properties"]["user_b"].clone()];
    assert!(users.contains(&json!("alice@local")) && users.contains(&json!("bob@local")));
}

#[tokio::test]
async fn changes_poll_since_a_sequence() {
    let (app, engine) = app();
    let start = engine.feed().latest();
    let (_, v) = call(&app, Method::POST, "/layers/edit_node/features", None, Some(node(700.0, 700.0))).await;
    let (status, c) = call(&app, Method::GET, &format!("/changes?since={start}"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(c["events"], v["changes"]);
    assert_eq!(c["latest"], engine.feed().latest());

    let (status, e) = call(&app, Method::GET, &format!("/changes?since={}", start + 1_000), None, None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{e}");
    let (status, _) = call(&app, Method::GET, "/changes", None, None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn resume_older_than_history_is_gone() {
    let (app, engine) = app();
    // The feed starts at the sequence the store was loaded with.
    assert!(engine.feed().latest() > 0);
    let (status, e) = call(&app, Method::GET, "/changes?since=0", None, None).await;
    assert_eq!(status, StatusCode::GONE);
    assert_eq!(e["code"], "resume_too_old");
}
