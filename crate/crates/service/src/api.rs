//! HTTP JSON API and the `/feed` websocket.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::connect_info::ConnectInfo;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Extension, Json, Router};
use serde_json::{json, Value};
use streetbase_core::collab::CONFLICTS;
use streetbase_core::engine::{error_json, now_ms, Engine, ExtentRecorder, FeedError, FeedEvent, FeedSink, PendingExtent};
use streetbase_core::store::{ChangeRecord, ChangeSet, Feature, FeatureId, Origin};
use streetbase_core::trigger::{Filter, LayerKind};
use streetbase_core::EngineError;
use streetbase_geom::Rect;
use tokio::sync::{mpsc, oneshot};

/// Events buffered per feed connection before it is dropped.
pub const FEED_BUFFER: usize = 1024;
pub const SESSION_HEADER: &str = "x-session";
const ANONYMOUS: &str = "anonymous";

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub recorder: Arc<ExtentRecorder>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>) -> AppState {
        let recorder = Arc::new(ExtentRecorder::start(engine.clone()));
        AppState { engine, recorder }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/layers", get(list_layers))
        .route("/layers/{name}/features", get(list_features).post(insert_feature))
        .route("/layers/{name}/features/{id}", put(update_feature).delete(delete_feature).get(get_feature))
        .route("/sessions", post(open_session))
        .route("/extents", post(record_extent))
        .route("/conflicts", get(conflicts))
        .route("/changes", get(changes))
        .route("/feed", get(feed))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> ApiError {
        ApiError { status, body: json!({"code": code, "message": message.into()}) }
    }

    fn engine(e: &EngineError, layer: Option<&str>, feature: Option<FeatureId>) -> ApiError {
        ApiError { status: status_for(e), body: error_json(e, layer, feature) }
    }

    fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

pub fn status_for(e: &EngineError) -> StatusCode {
    match e.code() {
        "not_found" => StatusCode::NOT_FOUND,
        "conflict" | "concurrent_modification" => StatusCode::CONFLICT,
        "unsupported" => StatusCode::METHOD_NOT_ALLOWED,
        "parse_error" => StatusCode::BAD_REQUEST,
        "cyclic_trigger" | "misconfigured" | "io_error" => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn collection(features: &[Feature]) -> Value {
    json!({"type": "FeatureCollection", "features": features.iter().map(Feature::to_geojson).collect::<Vec<_>>()})
}

fn origin(state: &AppState, headers: &HeaderMap) -> ApiResult<Origin> {
    match headers.get(SESSION_HEADER) {
        None => Ok(Origin::user(ANONYMOUS)),
        Some(v) => {
            let token = v.to_str().map_err(|_| ApiError::bad_request("session header is not text"))?;
            state
                .engine
                .session(token)
                .map(|s| Origin::user(s.user_id))
                .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unknown_session", format!("no session {token}")))
        }
    }
}

fn parse_json(body: &Bytes) -> ApiResult<Value> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn parse_feature(body: &Bytes, layer: &str) -> ApiResult<Feature> {
    let v = parse_json(body)?;
    Feature::from_geojson(&v).map_err(|m| {
        let e = EngineError::Validation { layer: layer.to_string(), message: m };
        ApiError::engine(&e, Some(layer), None)
    })
}

fn parse_bbox(text: &str) -> ApiResult<Rect> {
    let v: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| ApiError::bad_request(format!("bbox must be x1,y1,x2,y2, got {text}")))?;
    match v[..] {
        [x1, y1, x2, y2] if v.iter().all(|c| c.is_finite()) => Ok(Rect::new(x1, y1, x2, y2)),
        _ => Err(ApiError::bad_request(format!("bbox must be x1,y1,x2,y2, got {text}"))),
    }
}

async fn list_layers(State(st): State<AppState>) -> ApiResult<Json<Value>> {
    let out = st.engine.read(|s| {
        let reg = s.registry();
        let mut names: Vec<String> = s.layers().map(|l| l.schema().name.clone()).collect();
        names.extend(reg.views().map(|v| v.name.clone()));
        names.extend(reg.bindings().map(|b| b.name.clone()));
        names.extend(reg.derived().map(|d| d.schema.name.clone()));
        names
            .into_iter()
            .filter_map(|n| {
                let kind = s.kind_of(&n)?;
                let schema = s.read_schema(&n).ok()?;
                let writable = match kind {
                    LayerKind::Layer => !schema.generated,
                    LayerKind::View => true,
                    _ => false,
                };
                let mut v = serde_json::to_value(&schema).ok()?;
                v["kind"] = json!(kind.as_str());
                v["writable"] = json!(writable);
                Some(v)
            })
            .collect::<Vec<_>>()
    });
    Ok(Json(Value::Array(out)))
}

async fn list_features(
    State(st): State<AppState>,
    Path(name): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let bbox = q.get("bbox").map(|b| parse_bbox(b)).transpose()?;
    let rows = st
        .engine
        .read(|s| s.query(&name, bbox.as_ref(), &Filter::default()))
        .map_err(|e| ApiError::engine(&e, Some(&name), None))?;
    Ok(Json(collection(&rows)))
}

async fn get_feature(State(st): State<AppState>, Path((name, id)): Path<(String, FeatureId)>) -> ApiResult<Json<Value>> {
    let f = st
        .engine
        .read(|s| s.get(&name, id))
        .map_err(|e| ApiError::engine(&e, Some(&name), Some(id)))?
        .ok_or_else(|| ApiError::engine(&EngineError::NotFound(format!("{name} {id}")), Some(&name), Some(id)))?;
    Ok(Json(f.to_geojson()))
}

async fn commit(st: &AppState, cs: ChangeSet, layer: &str, feature: Option<FeatureId>) -> ApiResult<Value> {
    let engine = st.engine.clone();
    let done = tokio::task::spawn_blocking(move || engine.apply(cs))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| ApiError::engine(&e, Some(layer), feature))?;
    let events: Vec<Value> = done
        .records
        .iter()
        .filter_map(|r| FeedEvent::from_record(r, done.sequence))
        .map(|e| e.to_json())
        .collect();
    Ok(json!({
        "id": done.records.first().and_then(|r| r.id),
        "sequence": done.sequence,
        "changes": events,
        "warnings": done.warnings,
    }))
}

async fn insert_feature(
    State(st): State<AppState>,
    Path(name): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let origin = origin(&st, &headers)?;
    let f = parse_feature(&body, &name)?;
    let cs = ChangeSet::new(origin).with(ChangeRecord::insert(&name, f));
    Ok((StatusCode::CREATED, Json(commit(&st, cs, &name, None).await?)))
}

async fn update_feature(
    State(st): State<AppState>,
    Path((name, id)): Path<(String, FeatureId)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let origin = origin(&st, &headers)?;
    let f = parse_feature(&body, &name)?;
    let cs = ChangeSet::new(origin).with(ChangeRecord::update(&name, id, f));
    Ok(Json(commit(&st, cs, &name, Some(id)).await?))
}

async fn delete_feature(
    State(st): State<AppState>,
    Path((name, id)): Path<(String, FeatureId)>,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let origin = origin(&st, &headers)?;
    let cs = ChangeSet::new(origin).with(ChangeRecord::delete(&name, id));
    Ok(Json(commit(&st, cs, &name, Some(id)).await?))
}

async fn open_session(
    State(st): State<AppState>,
    peer: Option<Extension<ConnectInfo<SocketAddr>>>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let v = if body.is_empty() { json!({}) } else { parse_json(&body)? };
    let name = v.get("name").and_then(Value::as_str).unwrap_or(ANONYMOUS);
    if name.is_empty() || name.contains('@') {
        return Err(ApiError::bad_request("name must be non-empty and must not contain '@'"));
    }
    let address = peer.map_or_else(|| "local".to_string(), |Extension(ConnectInfo(a))| a.ip().to_string());
    let s = st.engine.open_session(name, &address);
    Ok((StatusCode::CREATED, Json(json!(s))))
}

async fn record_extent(State(st): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let user = match origin(&st, &headers)? {
        Origin::User(u) if u != ANONYMOUS => u,
        _ => return Err(ApiError::new(StatusCode::UNAUTHORIZED, "unknown_session", "extents need a session")),
    };
    let v = parse_json(&body)?;
    let bbox = v
        .get("bbox")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 4)
        .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
        .ok_or_else(|| ApiError::bad_request("bbox must be [x1, y1, x2, y2]"))?;
    let scale = v
        .get("scale")
        .and_then(Value::as_f64)
        .ok_or_else(|| ApiError::bad_request("scale is required"))?;
    let t = v.get("t").and_then(Value::as_i64).unwrap_or_else(now_ms);
    let queued = st.recorder.record(PendingExtent {
        user,
        rect: Rect::new(bbox[0], bbox[1], bbox[2], bbox[3]),
        t,
        scale,
    });
    Ok((StatusCode::ACCEPTED, Json(json!({"queued": queued}))))
}

async fn conflicts(State(st): State<AppState>) -> ApiResult<Json<Value>> {
    let rows = st.engine.read(|s| s.read(CONFLICTS)).map_err(|e| ApiError::engine(&e, Some(CONFLICTS), None))?;
    Ok(Json(collection(&rows)))
}

fn since_error(e: FeedError) -> ApiError {
    match e {
        FeedError::TooOld { .. } => ApiError::new(StatusCode::GONE, "resume_too_old", e.to_string()),
        FeedError::Ahead { .. } => ApiError::bad_request(e.to_string()),
    }
}

fn since_param(q: &HashMap<String, String>) -> ApiResult<Option<u64>> {
    q.get("since")
        .map(|s| s.parse::<u64>().map_err(|_| ApiError::bad_request(format!("since must be a sequence number, got {s}"))))
        .transpose()
}

async fn changes(State(st): State<AppState>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Json<Value>> {
    let since = since_param(&q)?.ok_or_else(|| ApiError::bad_request("since is required"))?;
    let events = st.engine.feed().since(since).map_err(since_error)?;
    let latest = events.last().map_or(since, |e| e.seq);
    Ok(Json(json!({
        "latest": latest,
        "events": events.iter().map(|e| e.to_json()).collect::<Vec<_>>(),
    })))
}

struct WsSink {
    events: mpsc::Sender<Arc<FeedEvent>>,
    dropped: std::sync::Mutex<Option<oneshot::Sender<u64>>>,
}

impl FeedSink for WsSink {
    fn offer(&self, event: Arc<FeedEvent>) -> bool {
        self.events.try_send(event).is_ok()
    }

    fn close(&self, since: u64) {
        if let Some(tx) = self.dropped.lock().expect("sink lock").take() {
            let _ = tx.send(since);
        }
    }
}

pub fn change_frame(ev: &FeedEvent) -> String {
    let mut v = ev.to_json();
    v["type"] = json!("change");
    v.to_string()
}

async fn feed(
    State(st): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
    ws: WebSocketUpgrade,
) -> ApiResult<Response> {
    let since = since_param(&q)?;
    let (events, rx) = mpsc::channel(FEED_BUFFER);
    let (dropped, dropped_rx) = oneshot::channel();
    let sink = WsSink { events, dropped: std::sync::Mutex::new(Some(dropped)) };
    let id = st.engine.feed().subscribe(since, Box::new(sink)).map_err(since_error)?;
    let engine = st.engine.clone();
    Ok(ws.on_upgrade(move |socket| async move {
        pump(socket, rx, dropped_rx).await;
        engine.feed().unsubscribe(id);
    }))
}

async fn pump(mut socket: WebSocket, mut rx: mpsc::Receiver<Arc<FeedEvent>>, mut dropped: oneshot::Receiver<u64>) {
    loop {
        tokio::select! {
            biased;
            ev = rx.recv() => match ev {
                Some(ev) => {
                    if socket.send(Message::Text(change_frame(&ev).into())).await.is_err() {
                        return;
                    }
                }
                None => break,
            },
            msg = socket.recv() => match msg {
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => return,
                _ => {}
            },
        }
    }
    // The feed let go of this subscriber: flush what is buffered, then say
    // where to resume.
    while let Ok(ev) = rx.try_recv() {
        if socket.send(Message::Text(change_frame(&ev).into())).await.is_err() {
            return;
        }
    }
    if let Ok(since) = dropped.try_recv() {
        let frame = json!({"type": "dropped", "since": since}).to_string();
        let _ = socket.send(Message::Text(frame.into())).await;
    }
    let _ = socket.send(Message::Close(None)).await;
}
