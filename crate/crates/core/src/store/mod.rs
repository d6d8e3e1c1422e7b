//! Typed feature layers and atomic change sets.

mod change;
mod feature;
mod schema;
mod value;

use std::collections::BTreeMap;

use streetbase_geom::Rect;

pub use change::{ChangeKind, ChangeRecord, ChangeSet, Origin};
pub use feature::{Feature, FeatureId, Geometry};
pub use schema::{AttrDef, GeometryKind, Schema};
pub use value::{AttrType, Value};

use crate::config::Config;
use crate::error::EngineError;
use crate::trigger::{Filter, Registry, Result, Tx};

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub(crate) schema: Schema,
    pub(crate) features: BTreeMap<FeatureId, Feature>,
    pub(crate) next_id: FeatureId,
}

impl Layer {
    fn new(schema: Schema) -> Self {
        Layer {
            schema,
            features: BTreeMap::new(),
            next_id: 1,
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn get(&self, id: FeatureId) -> Option<&Feature> {
        self.features.get(&id)
    }

    pub fn features(&self) -> impl DoubleEndedIterator<Item = &Feature> + Clone {
        self.features.values()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn next_id(&self) -> FeatureId {
        self.next_id
    }
}

/// The project database: layers, registered behaviour and sequence counters.
#[derive(Clone)]
pub struct Store {
    pub(crate) config: Config,
    pub(crate) layers: BTreeMap<String, Layer>,
    pub(crate) registry: Registry,
    pub(crate) last_seq: u64,
    pub(crate) last_set: u64,
}

impl Store {
    pub fn new(config: Config) -> Self {
        Store {
            config,
            layers: BTreeMap::new(),
            registry: Registry::default(),
            last_seq: 0,
            last_set: 0,
        }
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn last_set(&self) -> u64 {
        self.last_set
    }

    pub fn create_layer(&mut self, schema: Schema) -> Result<()> {
        schema.validate_definition()?;
        if self.kind_of(&schema.name).is_some() {
            return Err(EngineError::Conflict(format!("layer {} already exists", schema.name)));
        }
        self.layers.insert(schema.name.clone(), Layer::new(schema));
        Ok(())
    }

    pub fn layer(&self, name: &str) -> Result<&Layer> {
        self.layers
            .get(name)
            .ok_or_else(|| EngineError::NotFound(format!("layer {name}")))
    }

    pub fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.layers.values()
    }

    /// Features of `name` intersecting `bbox` and matching `filter`, in id order.
    pub fn query(&self, name: &str, bbox: Option<&Rect>, filter: &Filter) -> Result<Vec<Feature>> {
        let mut out = self.read(name)?;
        out.retain(|f| {
            filter.matches(f)
                && bbox.is_none_or(|b| f.geometry.as_ref().is_some_and(|g| g.intersects_rect(b)))
        });
        Ok(out)
    }

    /// Applies `cs` atomically. On success returns every applied record,
    /// cascades included, numbered for the change feed.
    pub fn apply(&mut self, cs: ChangeSet) -> Result<ChangeSet> {
        let origin = cs.origin.clone();
        let (_, committed) = self.run(origin.clone(), |tx| {
            for mut rec in cs.records {
                rec.origin = origin.clone();
                rec.depth = 0;
                rec.seq = None;
                tx.dispatch(rec)?;
            }
            Ok(())
        })?;
        Ok(committed)
    }

    /// Runs `body` as one system change set.
    pub fn transact<T>(&mut self, body: impl FnOnce(&mut Tx<'_>) -> Result<T>) -> Result<(T, ChangeSet)> {
        self.run(Origin::System, body)
    }

    fn run<T>(&mut self, origin: Origin, body: impl FnOnce(&mut Tx<'_>) -> Result<T>) -> Result<(T, ChangeSet)> {
        let mut tx = Tx::begin(self, origin);
        let out = body(&mut tx).and_then(|v| tx.finish().map(|_| v));
        match out {
            Ok(v) => Ok((v, tx.commit())),
            Err(e) => {
                tx.rollback();
                Err(e)
            }
        }
    }

    /// Data equality: schemas, features, id counters and sequence counters.
    pub fn same_state(&self, other: &Store) -> bool {
        self.layers == other.layers && self.last_seq == other.last_seq && self.last_set == other.last_set
    }

    pub(crate) fn restore_counters(&mut self, last_seq: u64, last_set: u64) {
        self.last_seq = last_seq;
        self.last_set = last_set;
    }

    /// Inserts a stored feature verbatim, keeping its id. Used by loaders.
    pub(crate) fn load_feature(&mut self, layer: &str, feature: Feature) -> Result<()> {
        let l = self
            .layers
            .get_mut(layer)
            .ok_or_else(|| EngineError::NotFound(format!("layer {layer}")))?;
        let f = l.schema.normalize(feature)?;
        if f.id == 0 || l.features.contains_key(&f.id) {
            return Err(EngineError::invalid(layer, format!("bad or duplicate id {}", f.id)));
        }
        l.next_id = l.next_id.max(f.id + 1);
        l.features.insert(f.id, f);
        Ok(())
    }

    pub(crate) fn set_next_id(&mut self, layer: &str, next: FeatureId) -> Result<()> {
        let l = self
            .layers
            .get_mut(layer)
            .ok_or_else(|| EngineError::NotFound(format!("layer {layer}")))?;
        l.next_id = l.next_id.max(next);
        Ok(())
    }
}
