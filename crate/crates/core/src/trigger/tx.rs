use std::collections::BTreeMap;

use super::{DeferredFn, Handler, LayerKind, Result, RowFn, Timing};
use crate::config::Config;
use crate::error::EngineError;
use crate::store::{ChangeKind, ChangeRecord, ChangeSet, Feature, FeatureId, Layer, Origin, Store};

/// Write access handed to triggers and view handlers for the duration of
/// one change set. Every write re-enters dispatch one level deeper; the
/// whole set is undone if anything fails.
pub struct Tx<'a> {
    store: &'a mut Store,
    origin: Origin,
    depth: usize,
    applied: Vec<ChangeRecord>,
    undo: Vec<(String, FeatureId, Option<Feature>)>,
    saved_next: BTreeMap<String, FeatureId>,
    pending: Vec<ChangeRecord>,
    warnings: Vec<String>,
}

impl<'a> Tx<'a> {
    pub(crate) fn begin(store: &'a mut Store, origin: Origin) -> Self {
        Tx {
            store,
            origin,
            depth: 0,
            applied: Vec::new(),
            undo: Vec::new(),
            saved_next: BTreeMap::new(),
            pending: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn store(&self) -> &Store {
        self.store
    }

    pub fn config(&self) -> &Config {
        &self.store.config
    }

    /// Origin of the change set being applied.
    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn layer(&self, name: &str) -> Result<&Layer> {
        self.store.layer(name)
    }

    pub fn get(&self, layer: &str, id: FeatureId) -> Option<&Feature> {
        self.store.layers.get(layer)?.features.get(&id)
    }

    pub fn read(&self, name: &str) -> Result<Vec<Feature>> {
        self.store.read(name)
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Records applied so far in this change set.
    pub fn applied(&self) -> &[ChangeRecord] {
        &self.applied
    }

    /// Dispatches a system record one level below the current one.
    pub fn write(&mut self, mut rec: ChangeRecord) -> Result<ChangeRecord> {
        rec.origin = Origin::System;
        rec.depth = self.depth + 1;
        self.dispatch(rec)
    }

    pub fn insert(&mut self, layer: &str, feature: Feature) -> Result<FeatureId> {
        Ok(self.write(ChangeRecord::insert(layer, feature))?.id.unwrap_or(0))
    }

    pub fn update(&mut self, layer: &str, feature: Feature) -> Result<()> {
        let id = feature.id;
        self.write(ChangeRecord::update(layer, id, feature)).map(|_| ())
    }

    pub fn delete(&mut self, layer: &str, id: FeatureId) -> Result<()> {
        self.write(ChangeRecord::delete(layer, id)).map(|_| ())
    }

    /// Updates only when the normalized feature differs from the stored one.
    pub fn update_if_changed(&mut self, layer: &str, feature: Feature) -> Result<bool> {
        let normalized = self.store.layer(layer)?.schema.normalize(feature)?;
        if self.get(layer, normalized.id) == Some(&normalized) {
            return Ok(false);
        }
        self.update(layer, normalized)?;
        Ok(true)
    }

    pub fn dispatch(&mut self, rec: ChangeRecord) -> Result<ChangeRecord> {
        let limit = self.store.config.trigger_depth_limit;
        if rec.depth > limit {
            return Err(EngineError::CyclicTrigger { limit });
        }
        match self.store.kind_of(&rec.layer) {
            None => Err(EngineError::NotFound(format!("layer {}", rec.layer))),
            Some(LayerKind::Merged | LayerKind::Derived) => Err(EngineError::Unsupported(format!(
                "{} is read-only",
                rec.layer
            ))),
            Some(LayerKind::View) => self.dispatch_view(rec),
            Some(LayerKind::Layer) => self.dispatch_base(rec),
        }
    }

    fn check_expected(&self, rec: &ChangeRecord, current: &Feature) -> Result<()> {
        if let Some(expected) = &rec.old {
            let mut expected = expected.clone();
            expected.id = current.id;
            let expected = self
                .store
                .read_schema(&rec.layer)
                .and_then(|s| s.normalize(expected.clone()))
                .unwrap_or(expected);
            if &expected != current {
                return Err(EngineError::ConcurrentModification {
                    layer: rec.layer.clone(),
                    id: current.id,
                });
            }
        }
        Ok(())
    }

    fn current(&self, rec: &ChangeRecord) -> Result<Feature> {
        let id = rec
            .id
            .ok_or_else(|| EngineError::invalid(&rec.layer, format!("{} needs a feature id", rec.kind.as_str())))?;
        self.store
            .get(&rec.layer, id)?
            .ok_or_else(|| EngineError::NotFound(format!("feature {}#{id}", rec.layer)))
    }

    fn dispatch_view(&mut self, mut rec: ChangeRecord) -> Result<ChangeRecord> {
        let view = self.store.registry.views[&rec.layer].clone();
        if !rec.origin.is_user() {
            // System writes bypass interpretation entirely.
            if self.store.kind_of(&view.base) != Some(LayerKind::Layer) {
                return Err(EngineError::Unsupported(format!("{} is read-only", view.base)));
            }
            rec.layer = view.base.clone();
            if rec.kind == ChangeKind::Update {
                if let (Some(id), Some(new)) = (rec.id, rec.new.as_mut()) {
                    if let Some(base) = self.get(&view.base, id) {
                        for (k, v) in &base.attributes {
                            new.attributes.entry(k.clone()).or_insert_with(|| v.clone());
                        }
                    }
                }
            }
            return self.dispatch(rec);
        }
        let Some(handler_name) = view.handlers.get(&rec.kind) else {
            let message = view.refusals.get(&rec.kind).cloned().unwrap_or_else(|| {
                format!("{} does not accept {} edits", view.name, rec.kind.as_str())
            });
            return Err(EngineError::Unsupported(message));
        };
        let handler = match self.store.registry.handlers.get(handler_name) {
            Some(Handler::View(f)) => f.clone(),
            _ => {
                return Err(EngineError::Misconfigured(format!(
                    "view handler {handler_name} is not registered"
                )))
            }
        };
        match rec.kind {
            ChangeKind::Insert => {
                if rec.new.is_none() {
                    return Err(EngineError::invalid(&rec.layer, "insert without a feature"));
                }
            }
            ChangeKind::Update | ChangeKind::Delete => {
                let current = self.current(&rec)?;
                self.check_expected(&rec, &current)?;
                if rec.kind == ChangeKind::Update {
                    let new = rec
                        .new
                        .as_mut()
                        .ok_or_else(|| EngineError::invalid(&view.name, "update without a feature"))?;
                    new.id = current.id;
                } else {
                    rec.new = None;
                }
                rec.old = Some(current);
            }
        }
        let idx = self.applied.len();
        self.applied.push(rec.clone());
        let saved = self.depth;
        self.depth = rec.depth;
        let out = handler(self, &rec);
        self.depth = saved;
        let id = out?;
        let logged = &mut self.applied[idx];
        if logged.kind == ChangeKind::Insert {
            logged.id = id;
            if let Some(n) = logged.new.as_mut() {
                n.id = id.unwrap_or(0);
            }
        }
        Ok(logged.clone())
    }

    fn row_handler(&self, name: &str) -> Result<RowFn> {
        match self.store.registry.handlers.get(name) {
            Some(Handler::Row(f)) => Ok(f.clone()),
            _ => Err(EngineError::Misconfigured(format!("row handler {name} is not registered"))),
        }
    }

    fn run_row_triggers(&mut self, timing: Timing, rec: &mut ChangeRecord) -> Result<()> {
        let specs = self.store.registry.triggers_for(&rec.layer, timing, rec.kind);
        for spec in specs {
            let f = self.row_handler(&spec.handler)?;
            let saved = self.depth;
            self.depth = rec.depth;
            let out = f(self, rec);
            self.depth = saved;
            out?;
        }
        Ok(())
    }

    fn dispatch_base(&mut self, mut rec: ChangeRecord) -> Result<ChangeRecord> {
        let schema = self.store.layers[&rec.layer].schema.clone();
        if rec.origin.is_user() && schema.generated {
            return Err(EngineError::Unsupported(format!(
                "{} is generated; edit it through its view",
                rec.layer
            )));
        }
        match rec.kind {
            ChangeKind::Insert => {
                let new = rec
                    .new
                    .take()
                    .ok_or_else(|| EngineError::invalid(&rec.layer, "insert without a feature"))?;
                rec.new = Some(schema.normalize(new)?);
                rec.old = None;
                rec.id = None;
            }
            ChangeKind::Update => {
                let current = self.current(&rec)?;
                self.check_expected(&rec, &current)?;
                let mut new = rec
                    .new
                    .take()
                    .ok_or_else(|| EngineError::invalid(&rec.layer, "update without a feature"))?;
                new.id = current.id;
                rec.new = Some(schema.normalize(new)?);
                rec.old = Some(current);
            }
            ChangeKind::Delete => {
                let current = self.current(&rec)?;
                self.check_expected(&rec, &current)?;
                rec.old = Some(current);
                rec.new = None;
            }
        }

        self.run_row_triggers(Timing::Before, &mut rec)?;
        if let Some(new) = rec.new.take() {
            let id = new.id;
            let mut n = schema.normalize(new)?;
            n.id = id;
            rec.new = Some(n);
        }

        let layer_name = rec.layer.clone();
        if !self.saved_next.contains_key(&layer_name) {
            let next = self.store.layers[&layer_name].next_id;
            self.saved_next.insert(layer_name.clone(), next);
        }
        let layer = self.store.layers.get_mut(&layer_name).expect("layer checked");
        match rec.kind {
            ChangeKind::Insert => {
                let id = layer.next_id;
                layer.next_id += 1;
                let new = rec.new.as_mut().expect("insert payload");
                new.id = id;
                layer.features.insert(id, new.clone());
                rec.id = Some(id);
                self.undo.push((layer_name.clone(), id, None));
            }
            ChangeKind::Update => {
                let new = rec.new.clone().expect("update payload");
                let id = new.id;
                let prev = layer.features.insert(id, new);
                self.undo.push((layer_name.clone(), id, prev));
            }
            ChangeKind::Delete => {
                let id = rec.id.expect("delete id");
                let prev = layer.features.remove(&id);
                self.undo.push((layer_name.clone(), id, prev));
            }
        }
        self.applied.push(rec.clone());
        if self.store.registry.has_deferred(&layer_name, rec.kind) {
            self.pending.push(rec.clone());
        }
        let mut after = rec.clone();
        self.run_row_triggers(Timing::After, &mut after)?;
        Ok(rec)
    }

    /// Runs deferred triggers until no pending records remain.
    pub(crate) fn finish(&mut self) -> Result<()> {
        let limit = self.store.config.trigger_depth_limit;
        let mut round = 0;
        while !self.pending.is_empty() {
            if round >= limit {
                return Err(EngineError::CyclicTrigger { limit });
            }
            round += 1;
            let batch = std::mem::take(&mut self.pending);
            let specs: Vec<_> = self
                .store
                .registry
                .triggers
                .iter()
                .filter(|t| t.timing == Timing::Deferred)
                .cloned()
                .collect();
            let mut handlers: Vec<String> = Vec::new();
            for s in &specs {
                if !handlers.contains(&s.handler) {
                    handlers.push(s.handler.clone());
                }
            }
            for name in handlers {
                let records: Vec<ChangeRecord> = batch
                    .iter()
                    .filter(|r| {
                        specs
                            .iter()
                            .any(|s| s.handler == name && s.layer == r.layer && s.fires_on(r.kind))
                    })
                    .cloned()
                    .collect();
                if records.is_empty() {
                    continue;
                }
                let f: DeferredFn = match self.store.registry.handlers.get(&name) {
                    Some(Handler::Deferred(f)) => f.clone(),
                    _ => {
                        return Err(EngineError::Misconfigured(format!(
                            "deferred handler {name} is not registered"
                        )))
                    }
                };
                self.depth = 0;
                f(self, &records)?;
            }
        }
        Ok(())
    }

    pub(crate) fn commit(self) -> ChangeSet {
        let store = self.store;
        let mut records = self.applied;
        let sequence = if records.is_empty() {
            None
        } else {
            for r in &mut records {
                store.last_seq += 1;
                r.seq = Some(store.last_seq);
            }
            store.last_set += 1;
            Some(store.last_set)
        };
        ChangeSet {
            origin: self.origin,
            records,
            sequence,
            warnings: self.warnings,
        }
    }

    pub(crate) fn rollback(self) {
        let store = self.store;
        for (layer, id, prev) in self.undo.into_iter().rev() {
            let l = store.layers.get_mut(&layer).expect("undo layer");
            match prev {
                Some(f) => {
                    l.features.insert(id, f);
                }
                None => {
                    l.features.remove(&id);
                }
            }
        }
        for (layer, next) in self.saved_next {
            store.layers.get_mut(&layer).expect("undo layer").next_id = next;
        }
    }
}
