//! Shared engine: one exclusive writer over the store, a sequenced change
//! feed, user sessions and the asynchronous screen-extent recorder.

use std::collections::{BTreeMap, VecDeque};
use std::hash::{BuildHasher, Hasher};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::Mutex;
use serde::Serialize;
use serde_json::Value as Json;
use streetbase_geom::Rect;

use crate::collab::SCREEN_EXTENT;
use crate::config::Config;
use crate::error::EngineError;
use crate::project::{load_project, save_project};
use crate::store::{ChangeKind, ChangeRecord, ChangeSet, Feature, FeatureId, Origin, Store};
use crate::trigger::Result;

/// One committed change record as seen by feed subscribers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedEvent {
    pub seq: u64,
    pub set: Option<u64>,
    pub layer: String,
    pub kind: ChangeKind,
    pub id: Option<FeatureId>,
    /// GeoJSON of the new row; absent on delete.
    pub new: Option<Json>,
    pub origin: Origin,
}

impl FeedEvent {
    pub fn from_record(rec: &ChangeRecord, set: Option<u64>) -> Option<FeedEvent> {
        Some(FeedEvent {
            seq: rec.seq?,
            set,
            layer: rec.layer.clone(),
            kind: rec.kind,
            id: rec.id,
            new: rec.new.as_ref().map(Feature::to_geojson),
            origin: rec.origin.clone(),
        })
    }

    pub fn to_json(&self) -> Json {
        serde_json::to_value(self).expect("feed events serialize")
    }
}

/// Receiving end of a subscription. `offer` must not block; returning
/// false means the buffer is full and the subscriber is dropped.
pub trait FeedSink: Send {
    fn offer(&self, event: Arc<FeedEvent>) -> bool;
    /// Called once when the subscriber is dropped; resume with `since`.
    fn close(&self, since: u64);
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeedError {
    #[error("sequence {since} is older than the retained history, which starts after {first}")]
    TooOld { since: u64, first: u64 },
    #[error("sequence {since} is ahead of the latest committed sequence {latest}")]
    Ahead { since: u64, latest: u64 },
}

struct Subscriber {
    sink: Box<dyn FeedSink>,
    last: u64,
}

struct FeedState {
    /// Sequence number before the oldest retained event.
    floor: u64,
    latest: u64,
    log: VecDeque<Arc<FeedEvent>>,
    subscribers: BTreeMap<u64, Subscriber>,
    next_id: u64,
}

/// Retains recent events for resumption and fans them out to subscribers.
pub struct Feed {
    state: Mutex<FeedState>,
    retain: usize,
}

pub const DEFAULT_RETAIN: usize = 100_000;

impl Feed {
    pub fn new(start: u64, retain: usize) -> Feed {
        Feed {
            state: Mutex::new(FeedState {
                floor: start,
                latest: start,
                log: VecDeque::new(),
                subscribers: BTreeMap::new(),
                next_id: 1,
            }),
            retain: retain.max(1),
        }
    }

    pub fn latest(&self) -> u64 {
        self.state.lock().latest
    }

    pub fn publish(&self, events: Vec<FeedEvent>) {
        let mut st = self.state.lock();
        for ev in events {
            let ev = Arc::new(ev);
            st.latest = ev.seq;
            st.log.push_back(ev.clone());
            if st.log.len() > self.retain {
                if let Some(old) = st.log.pop_front() {
                    st.floor = old.seq;
                }
            }
            st.subscribers.retain(|_, s| deliver(s, &ev));
        }
    }

    /// Events after `since`, in order.
    pub fn since(&self, since: u64) -> std::result::Result<Vec<Arc<FeedEvent>>, FeedError> {
        let st = self.state.lock();
        check_since(&st, since)?;
        Ok(st.log.iter().filter(|e| e.seq > since).cloned().collect())
    }

    /// Replays events after `since` (or nothing when absent), then follows
    /// live events. Replay and registration happen under one lock, so the
    /// sequence seen by the sink has no gap.
    pub fn subscribe(&self, since: Option<u64>, sink: Box<dyn FeedSink>) -> std::result::Result<u64, FeedError> {
        let mut st = self.state.lock();
        let since = since.unwrap_or(st.latest);
        check_since(&st, since)?;
        let mut sub = Subscriber { sink, last: since };
        let backlog: Vec<Arc<FeedEvent>> = st.log.iter().filter(|e| e.seq > since).cloned().collect();
        let id = st.next_id;
        st.next_id += 1;
        for ev in &backlog {
            if !deliver(&mut sub, ev) {
                return Ok(id);
            }
        }
        st.subscribers.insert(id, sub);
        Ok(id)
    }

    pub fn unsubscribe(&self, id: u64) {
        self.state.lock().subscribers.remove(&id);
    }

    pub fn subscriber_count(&self) -> usize {
        self.state.lock().subscribers.len()
    }
}

fn check_since(st: &FeedState, since: u64) -> std::result::Result<(), FeedError> {
    if since < st.floor {
        return Err(FeedError::TooOld { since, first: st.floor });
    }
    if since > st.latest {
        return Err(FeedError::Ahead { since, latest: st.latest });
    }
    Ok(())
}

fn deliver(sub: &mut Subscriber, ev: &Arc<FeedEvent>) -> bool {
    if sub.sink.offer(ev.clone()) {
        sub.last = ev.seq;
        true
    } else {
        sub.sink.close(sub.last);
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    pub token: String,
    pub user_id: String,
    pub created: i64,
}

pub fn now_ms() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as i64)
}

pub struct Engine {
    store: Mutex<Store>,
    feed: Feed,
    sessions: Mutex<BTreeMap<String, Session>>,
    token_seed: AtomicU64,
}

impl Engine {
    pub fn new(store: Store) -> Engine {
        let start = store.last_seq();
        Engine {
            store: Mutex::new(store),
            feed: Feed::new(start, DEFAULT_RETAIN),
            sessions: Mutex::new(BTreeMap::new()),
            token_seed: AtomicU64::new(0),
        }
    }

    pub fn load(dir: &Path, config: Option<Config>) -> Result<Engine> {
        Ok(Engine::new(load_project(dir, config, crate::install)?))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        save_project(&self.store.lock(), dir)
    }

    pub fn feed(&self) -> &Feed {
        &self.feed
    }

    pub fn read<T>(&self, f: impl FnOnce(&Store) -> T) -> T {
        f(&self.store.lock())
    }

    /// Commits and publishes while holding the writer, so feed order is
    /// commit order.
    pub fn apply(&self, cs: ChangeSet) -> Result<ChangeSet> {
        let mut store = self.store.lock();
        let committed = store.apply(cs)?;
        self.publish(&committed);
        Ok(committed)
    }

    fn publish(&self, cs: &ChangeSet) {
        let events = cs.records.iter().filter_map(|r| FeedEvent::from_record(r, cs.sequence)).collect();
        self.feed.publish(events);
    }

    /// Full regeneration as one published change set. Returns the number
    /// of rows it changed.
    pub fn generate(&self) -> Result<usize> {
        let mut store = self.store.lock();
        let (_, cs) = store.transact(|tx| {
            let dirty = crate::model::Dirty::everything(tx.store());
            crate::model::regenerate(tx, &dirty)
        })?;
        self.publish(&cs);
        Ok(cs.records.len())
    }

    pub fn check(&self) -> Vec<String> {
        crate::violations(&self.store.lock())
    }

    /// Opens a session. The user id is the given name plus the caller's
    /// address, so one person on two machines shows as two users.
    pub fn open_session(&self, name: &str, address: &str) -> Session {
        let seed = self.token_seed.fetch_add(1, Ordering::Relaxed);
        let mut h = std::collections::hash_map::RandomState::new().build_hasher();
        h.write_u64(seed);
        h.write_i64(now_ms());
        let token = format!("{:016x}{:04x}", h.finish(), seed & 0xffff);
        let session = Session {
            token: token.clone(),
            user_id: format!("{name}@{address}"),
            created: now_ms(),
        };
        self.sessions.lock().insert(token, session.clone());
        session
    }

    pub fn session(&self, token: &str) -> Option<Session> {
        self.sessions.lock().get(token).cloned()
    }

    pub fn close_session(&self, token: &str) -> bool {
        self.sessions.lock().remove(token).is_some()
    }
}

/// A screen extent waiting to be committed.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingExtent {
    pub user: String,
    pub rect: Rect,
    pub t: i64,
    pub scale: f64,
}

enum Job {
    Extent(PendingExtent),
    Flush(mpsc::Sender<()>),
}

#[derive(Debug, Default)]
pub struct RecorderStats {
    pub committed: AtomicU64,
    pub refused: AtomicU64,
}

/// Queues extents and commits them on a background thread. Callers never
/// wait for a commit. Each drained batch is committed in timestamp order,
/// which keeps every user's extents chronological.
pub struct ExtentRecorder {
    tx: mpsc::Sender<Job>,
    stats: Arc<RecorderStats>,
    band: (f64, f64),
}

impl ExtentRecorder {
    pub fn start(engine: Arc<Engine>) -> ExtentRecorder {
        let (tx, rx) = mpsc::channel::<Job>();
        let stats = Arc::new(RecorderStats::default());
        let band = engine.read(|s| (s.config().min_scale, s.config().max_scale));
        let worker_stats = stats.clone();
        thread::Builder::new()
            .name("extent-recorder".into())
            .spawn(move || drain(&engine, &rx, &worker_stats))
            .expect("spawn extent recorder");
        ExtentRecorder { tx, stats, band }
    }

    /// Returns false when the scale lies outside the tracked band and the
    /// extent is skipped.
    pub fn record(&self, extent: PendingExtent) -> bool {
        if !(extent.scale >= self.band.0 && extent.scale <= self.band.1) {
            return false;
        }
        self.tx.send(Job::Extent(extent)).is_ok()
    }

    /// Blocks until everything queued before this call is committed.
    pub fn flush(&self) {
        let (done, wait) = mpsc::channel();
        if self.tx.send(Job::Flush(done)).is_ok() {
            let _ = wait.recv();
        }
    }

    pub fn committed(&self) -> u64 {
        self.stats.committed.load(Ordering::Relaxed)
    }

    pub fn refused(&self) -> u64 {
        self.stats.refused.load(Ordering::Relaxed)
    }
}

fn drain(engine: &Engine, rx: &mpsc::Receiver<Job>, stats: &RecorderStats) {
    while let Ok(first) = rx.recv() {
        let mut batch = vec![first];
        batch.extend(rx.try_iter());
        let mut extents = Vec::new();
        let mut waiting = Vec::new();
        for job in batch {
            match job {
                Job::Extent(e) => extents.push(e),
                Job::Flush(done) => waiting.push(done),
            }
        }
        extents.sort_by_key(|e| e.t);
        for e in extents {
            let poly = match e.rect.to_polygon() {
                Ok(p) => p,
                Err(_) => {
                    stats.refused.fetch_add(1, Ordering::Relaxed);
                    continue;
                }
            };
            let f = Feature::polygon(poly)
                .with("user_id", e.user.as_str())
                .with("t", e.t)
                .with("scale", e.scale);
            let cs = ChangeSet::new(Origin::user(e.user.clone())).with(ChangeRecord::insert(SCREEN_EXTENT, f));
            match engine.apply(cs) {
                Ok(_) => stats.committed.fetch_add(1, Ordering::Relaxed),
                Err(_) => stats.refused.fetch_add(1, Ordering::Relaxed),
            };
        }
        for done in waiting {
            let _ = done.send(());
        }
    }
}

/// Error body shared by the HTTP layer and the CLI.
pub fn error_json(e: &EngineError, layer: Option<&str>, feature: Option<FeatureId>) -> Json {
    let mut v = serde_json::json!({"code": e.code(), "message": e.to_string()});
    if let Some(l) = layer {
        v["layer"] = l.into();
    }
    if let Some(f) = feature {
        v["feature"] = f.into();
    }
    v
}
