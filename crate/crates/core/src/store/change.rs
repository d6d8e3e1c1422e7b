use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value as Json};

use super::feature::{Feature, FeatureId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Insert,
    Update,
    Delete,
}

impl ChangeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChangeKind::Insert => "insert",
            ChangeKind::Update => "update",
            ChangeKind::Delete => "delete",
        }
    }
}

/// Who produced a change: a user session or the engine itself.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Origin {
    User(String),
    System,
}

impl Origin {
    pub fn user(id: impl Into<String>) -> Self {
        Origin::User(id.into())
    }

    pub fn is_user(&self) -> bool {
        matches!(self, Origin::User(_))
    }

    pub fn user_id(&self) -> Option<&str> {
        match self {
            Origin::User(u) => Some(u),
            Origin::System => None,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::User(u) => write!(f, "user:{u}"),
            Origin::System => f.write_str("system"),
        }
    }
}

impl Serialize for Origin {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Origin {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.strip_prefix("user:") {
            Some(u) => Ok(Origin::User(u.to_string())),
            None if s == "system" => Ok(Origin::System),
            None => Err(serde::de::Error::custom(format!("bad origin {s}"))),
        }
    }
}

/// One row-level change. `old` is filled from the store when applied;
/// a caller-supplied `old` must match the stored state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeRecord {
    pub kind: ChangeKind,
    pub layer: String,
    pub id: Option<FeatureId>,
    pub old: Option<Feature>,
    pub new: Option<Feature>,
    pub origin: Origin,
    pub seq: Option<u64>,
    /// Cascade depth at which the record was dispatched.
    pub depth: usize,
}

impl ChangeRecord {
    pub fn insert(layer: &str, feature: Feature) -> Self {
        ChangeRecord {
            kind: ChangeKind::Insert,
            layer: layer.to_string(),
            id: None,
            old: None,
            new: Some(feature),
            origin: Origin::System,
            seq: None,
            depth: 0,
        }
    }

    pub fn update(layer: &str, id: FeatureId, feature: Feature) -> Self {
        ChangeRecord {
            kind: ChangeKind::Update,
            layer: layer.to_string(),
            id: Some(id),
            old: None,
            new: Some(feature.with_id(id)),
            origin: Origin::System,
            seq: None,
            depth: 0,
        }
    }

    pub fn delete(layer: &str, id: FeatureId) -> Self {
        ChangeRecord {
            kind: ChangeKind::Delete,
            layer: layer.to_string(),
            id: Some(id),
            old: None,
            new: None,
            origin: Origin::System,
            seq: None,
            depth: 0,
        }
    }

    pub fn by(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }

    pub fn expecting(mut self, old: Feature) -> Self {
        self.old = Some(old);
        self
    }

    /// Feed representation: old payloads are not transmitted.
    pub fn to_event_json(&self) -> Json {
        json!({
            "seq": self.seq,
            "layer": self.layer,
            "kind": self.kind,
            "id": self.id,
            "new": self.new.as_ref().map(Feature::to_geojson),
            "origin": self.origin,
        })
    }
}

/// Atomic batch of changes. After commit, `records` holds every applied
/// record including trigger cascades, each with its feed sequence number.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeSet {
    pub origin: Origin,
    pub records: Vec<ChangeRecord>,
    pub sequence: Option<u64>,
    pub warnings: Vec<String>,
}

impl ChangeSet {
    pub fn new(origin: Origin) -> Self {
        ChangeSet {
            origin,
            records: Vec::new(),
            sequence: None,
            warnings: Vec::new(),
        }
    }

    pub fn with(mut self, record: ChangeRecord) -> Self {
        self.records.push(record);
        self
    }

    pub fn push(&mut self, record: ChangeRecord) {
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records touching `layer`.
    pub fn on<'a>(&'a self, layer: &'a str) -> impl Iterator<Item = &'a ChangeRecord> + 'a {
        self.records.iter().filter(move |r| r.layer == layer)
    }

    /// Id assigned to the first insert on `layer`.
    pub fn inserted_id(&self, layer: &str) -> Option<FeatureId> {
        self.on(layer).find(|r| r.kind == ChangeKind::Insert).and_then(|r| r.id)
    }
}
