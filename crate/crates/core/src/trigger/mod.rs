//! Triggers, proxy views, override bindings and the cascading dispatcher.

mod merge;
mod tx;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::error::EngineError;
use crate::store::{ChangeKind, ChangeRecord, Feature, FeatureId, GeometryKind, Schema, Store};

pub use merge::{merge_row, override_key, OverrideBinding};
pub use tx::Tx;

pub type Result<T, E = EngineError> = std::result::Result<T, E>;

/// Runs on one record; before-triggers may rewrite `record.new`.
pub type RowFn = Arc<dyn Fn(&mut Tx<'_>, &mut ChangeRecord) -> Result<()> + Send + Sync>;
/// Runs once per round at the end of a change set over the pending records.
pub type DeferredFn = Arc<dyn Fn(&mut Tx<'_>, &[ChangeRecord]) -> Result<()> + Send + Sync>;
/// Interprets a user edit on a proxy view; returns the id to report for inserts.
pub type ViewFn = Arc<dyn Fn(&mut Tx<'_>, &ChangeRecord) -> Result<Option<FeatureId>> + Send + Sync>;
/// Computes a read-only derived layer from committed state.
pub type DerivedFn = Arc<dyn Fn(&Store) -> Vec<Feature> + Send + Sync>;

#[derive(Clone)]
pub enum Handler {
    Row(RowFn),
    Deferred(DeferredFn),
    View(ViewFn),
    Derived(DerivedFn),
}

impl Handler {
    pub fn row(f: impl Fn(&mut Tx<'_>, &mut ChangeRecord) -> Result<()> + Send + Sync + 'static) -> Self {
        Handler::Row(Arc::new(f))
    }

    pub fn deferred(f: impl Fn(&mut Tx<'_>, &[ChangeRecord]) -> Result<()> + Send + Sync + 'static) -> Self {
        Handler::Deferred(Arc::new(f))
    }

    pub fn view(
        f: impl Fn(&mut Tx<'_>, &ChangeRecord) -> Result<Option<FeatureId>> + Send + Sync + 'static,
    ) -> Self {
        Handler::View(Arc::new(f))
    }

    pub fn derived(f: impl Fn(&Store) -> Vec<Feature> + Send + Sync + 'static) -> Self {
        Handler::Derived(Arc::new(f))
    }

    fn kind(&self) -> &'static str {
        match self {
            Handler::Row(_) => "row",
            Handler::Deferred(_) => "deferred",
            Handler::View(_) => "view",
            Handler::Derived(_) => "derived",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Timing {
    Before,
    After,
    /// Once per change set, after all immediate cascades settled.
    Deferred,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriggerSpec {
    pub name: String,
    pub layer: String,
    pub timing: Timing,
    pub events: Vec<ChangeKind>,
    pub handler: String,
    pub priority: i32,
}

impl TriggerSpec {
    pub fn new(name: &str, layer: &str, timing: Timing, events: &[ChangeKind], handler: &str) -> Self {
        TriggerSpec {
            name: name.to_string(),
            layer: layer.to_string(),
            timing,
            events: events.to_vec(),
            handler: handler.to_string(),
            priority: 0,
        }
    }

    pub fn priority(mut self, p: i32) -> Self {
        self.priority = p;
        self
    }

    pub fn fires_on(&self, kind: ChangeKind) -> bool {
        self.events.contains(&kind)
    }
}

/// Editable facade over a base layer. User edits go to the handlers;
/// system writes pass straight through to the base.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyView {
    pub name: String,
    pub base: String,
    /// Exposed attribute columns; `None` exposes all.
    pub columns: Option<Vec<String>>,
    pub handlers: BTreeMap<ChangeKind, String>,
    /// Explanation returned for events without a handler.
    pub refusals: BTreeMap<ChangeKind, String>,
}

impl ProxyView {
    pub fn new(name: &str, base: &str) -> Self {
        ProxyView {
            name: name.to_string(),
            base: base.to_string(),
            columns: None,
            handlers: BTreeMap::new(),
            refusals: BTreeMap::new(),
        }
    }

    pub fn columns(mut self, cols: &[&str]) -> Self {
        self.columns = Some(cols.iter().map(|c| c.to_string()).collect());
        self
    }

    pub fn on(mut self, kind: ChangeKind, handler: &str) -> Self {
        self.handlers.insert(kind, handler.to_string());
        self
    }

    pub fn refuse(mut self, kind: ChangeKind, message: &str) -> Self {
        self.refusals.insert(kind, message.to_string());
        self
    }

    pub fn allows(&self, kind: ChangeKind) -> bool {
        self.handlers.contains_key(&kind)
    }

    fn project(&self, mut f: Feature) -> Feature {
        if let Some(cols) = &self.columns {
            f.attributes.retain(|k, _| cols.iter().any(|c| c == k));
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedLayer {
    pub schema: Schema,
    pub handler: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Layer,
    View,
    Merged,
    Derived,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Layer => "layer",
            LayerKind::View => "view",
            LayerKind::Merged => "merged",
            LayerKind::Derived => "derived",
        }
    }
}

/// Everything registered besides the data itself.
#[derive(Clone, Default)]
pub struct Registry {
    pub(crate) handlers: BTreeMap<String, Handler>,
    pub(crate) triggers: Vec<TriggerSpec>,
    pub(crate) views: BTreeMap<String, ProxyView>,
    pub(crate) bindings: BTreeMap<String, OverrideBinding>,
    pub(crate) derived: BTreeMap<String, DerivedLayer>,
}

impl Registry {
    pub fn trigger_names(&self) -> Vec<String> {
        self.triggers.iter().map(|t| format!("{}.{}", t.layer, t.name)).collect()
    }

    pub fn views(&self) -> impl Iterator<Item = &ProxyView> {
        self.views.values()
    }

    pub fn bindings(&self) -> impl Iterator<Item = &OverrideBinding> {
        self.bindings.values()
    }

    pub fn derived(&self) -> impl Iterator<Item = &DerivedLayer> {
        self.derived.values()
    }

    pub(crate) fn triggers_for(&self, layer: &str, timing: Timing, kind: ChangeKind) -> Vec<TriggerSpec> {
        self.triggers
            .iter()
            .filter(|t| t.layer == layer && t.timing == timing && t.fires_on(kind))
            .cloned()
            .collect()
    }

    pub(crate) fn has_deferred(&self, layer: &str, kind: ChangeKind) -> bool {
        self.triggers
            .iter()
            .any(|t| t.layer == layer && t.timing == Timing::Deferred && t.fires_on(kind))
    }
}

impl Store {
    fn name_taken(&self, name: &str) -> bool {
        self.layers.contains_key(name)
            || self.registry.views.contains_key(name)
            || self.registry.bindings.contains_key(name)
            || self.registry.derived.contains_key(name)
    }

    pub fn register_handler(&mut self, name: &str, handler: Handler) -> Result<()> {
        if self.registry.handlers.contains_key(name) {
            return Err(EngineError::Conflict(format!("handler {name} already registered")));
        }
        self.registry.handlers.insert(name.to_string(), handler);
        Ok(())
    }

    fn expect_handler(&self, name: &str, kind: &str) -> Result<()> {
        match self.registry.handlers.get(name) {
            None => Err(EngineError::Misconfigured(format!("handler {name} is not registered"))),
            Some(h) if h.kind() != kind => Err(EngineError::Misconfigured(format!(
                "handler {name} is a {} handler, expected {kind}",
                h.kind()
            ))),
            Some(_) => Ok(()),
        }
    }

    pub fn register_trigger(&mut self, spec: TriggerSpec) -> Result<()> {
        if !self.layers.contains_key(&spec.layer) {
            return Err(EngineError::NotFound(format!("layer {}", spec.layer)));
        }
        let expected = if spec.timing == Timing::Deferred { "deferred" } else { "row" };
        self.expect_handler(&spec.handler, expected)?;
        if self
            .registry
            .triggers
            .iter()
            .any(|t| t.layer == spec.layer && t.name == spec.name)
        {
            return Err(EngineError::Conflict(format!(
                "trigger {} already exists on {}",
                spec.name, spec.layer
            )));
        }
        self.registry.triggers.push(spec);
        // Priority then name gives a total, deterministic order.
        self.registry
            .triggers
            .sort_by(|a, b| (a.priority, &a.name, &a.layer).cmp(&(b.priority, &b.name, &b.layer)));
        Ok(())
    }

    pub fn register_view(&mut self, view: ProxyView) -> Result<()> {
        if self.name_taken(&view.name) {
            return Err(EngineError::Conflict(format!("name {} already in use", view.name)));
        }
        if !self.layers.contains_key(&view.base) && !self.registry.bindings.contains_key(&view.base) {
            return Err(EngineError::NotFound(format!("base layer {}", view.base)));
        }
        for h in view.handlers.values() {
            self.expect_handler(h, "view")?;
        }
        self.registry.views.insert(view.name.clone(), view);
        Ok(())
    }

    pub fn register_binding(&mut self, binding: OverrideBinding) -> Result<()> {
        if self.name_taken(&binding.name) {
            return Err(EngineError::Conflict(format!("name {} already in use", binding.name)));
        }
        let auto = self.layer(&binding.auto)?.schema();
        let over = self.layer(&binding.override_layer)?.schema();
        for k in &binding.keys {
            if auto.attribute(k).is_none() || over.attribute(k).is_none() {
                return Err(EngineError::Misconfigured(format!(
                    "key column {k} missing from {} or {}",
                    binding.auto, binding.override_layer
                )));
            }
        }
        for c in &binding.columns {
            let ok = if c == "geometry" {
                auto.geometry == over.geometry
            } else {
                auto.attribute(c).is_some() && over.attribute(c).is_some()
            };
            if !ok {
                return Err(EngineError::Misconfigured(format!("overridable column {c} not shared")));
            }
        }
        if let Some(g) = &binding.gate {
            if auto.attribute(g).is_none() {
                return Err(EngineError::Misconfigured(format!("gate column {g} missing")));
            }
        }
        self.registry.bindings.insert(binding.name.clone(), binding);
        Ok(())
    }

    pub fn register_derived(&mut self, schema: Schema, handler: &str) -> Result<()> {
        if self.name_taken(&schema.name) {
            return Err(EngineError::Conflict(format!("name {} already in use", schema.name)));
        }
        self.expect_handler(handler, "derived")?;
        self.registry.derived.insert(
            schema.name.clone(),
            DerivedLayer {
                schema,
                handler: handler.to_string(),
            },
        );
        Ok(())
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn kind_of(&self, name: &str) -> Option<LayerKind> {
        if self.layers.contains_key(name) {
            Some(LayerKind::Layer)
        } else if self.registry.views.contains_key(name) {
            Some(LayerKind::View)
        } else if self.registry.bindings.contains_key(name) {
            Some(LayerKind::Merged)
        } else if self.registry.derived.contains_key(name) {
            Some(LayerKind::Derived)
        } else {
            None
        }
    }

    /// Schema seen by readers of any named layer, view or derived layer.
    pub fn read_schema(&self, name: &str) -> Result<Schema> {
        match self.kind_of(name) {
            Some(LayerKind::Layer) => Ok(self.layers[name].schema.clone()),
            Some(LayerKind::View) => {
                let v = &self.registry.views[name];
                let mut s = self.read_schema(&v.base)?;
                s.name = v.name.clone();
                s.generated = false;
                if let Some(cols) = &v.columns {
                    s.attributes.retain(|a| cols.contains(&a.name));
                }
                Ok(s)
            }
            Some(LayerKind::Merged) => {
                let b = &self.registry.bindings[name];
                let mut s = self.layers[&b.auto].schema.clone();
                s.name = b.name.clone();
                if b.gate.is_some() && s.geometry != GeometryKind::None {
                    s.geometry_nullable = true;
                }
                Ok(s)
            }
            Some(LayerKind::Derived) => Ok(self.registry.derived[name].schema.clone()),
            None => Err(EngineError::NotFound(format!("layer {name}"))),
        }
    }

    /// Reads every feature of a layer, view, merged or derived layer in id order.
    pub fn read(&self, name: &str) -> Result<Vec<Feature>> {
        match self.kind_of(name) {
            Some(LayerKind::Layer) => Ok(self.layers[name].features.values().cloned().collect()),
            Some(LayerKind::View) => {
                let v = &self.registry.views[name];
                Ok(self.read(&v.base)?.into_iter().map(|f| v.project(f)).collect())
            }
            Some(LayerKind::Merged) => {
                let b = &self.registry.bindings[name];
                Ok(b.merge(&self.layers[&b.auto], &self.layers[&b.override_layer]))
            }
            Some(LayerKind::Derived) => {
                let d = &self.registry.derived[name];
                match self.registry.handlers.get(&d.handler) {
                    Some(Handler::Derived(f)) => Ok(f(self)),
                    _ => Err(EngineError::Misconfigured(format!("handler {} missing", d.handler))),
                }
            }
            None => Err(EngineError::NotFound(format!("layer {name}"))),
        }
    }

    pub fn get(&self, name: &str, id: FeatureId) -> Result<Option<Feature>> {
        match self.kind_of(name) {
            Some(LayerKind::Layer) => Ok(self.layers[name].features.get(&id).cloned()),
            Some(LayerKind::View) => {
                let v = &self.registry.views[name];
                Ok(self.get(&v.base, id)?.map(|f| v.project(f)))
            }
            Some(LayerKind::Merged) => {
                let b = &self.registry.bindings[name];
                let auto = &self.layers[&b.auto];
                Ok(auto
                    .features
                    .get(&id)
                    .map(|row| b.merge_one(row, &self.layers[&b.override_layer])))
            }
            _ => Ok(self.read(name)?.into_iter().find(|f| f.id == id)),
        }
    }
}

/// Conjunction of attribute equality tests; integers and reals compare numerically.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Filter(pub Vec<(String, crate::store::Value)>);

impl Filter {
    pub fn eq(mut self, column: &str, v: impl Into<crate::store::Value>) -> Self {
        self.0.push((column.to_string(), v.into()));
        self
    }

    pub fn matches(&self, f: &Feature) -> bool {
        self.0.iter().all(|(k, want)| {
            let have = f.get(k);
            match (have.as_f64(), want.as_f64()) {
                (Some(a), Some(b)) => a == b,
                _ => have == want,
            }
        })
    }
}

/// Helper for handlers: the set of ids in `records` of a given layer.
pub fn touched_ids(records: &[ChangeRecord], layer: &str) -> BTreeSet<FeatureId> {
    records
        .iter()
        .filter(|r| r.layer == layer)
        .filter_map(|r| r.id)
        .collect()
}
