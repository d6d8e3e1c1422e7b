use std::collections::BTreeMap;

use crate::store::{Feature, Layer, Value};

/// Pairs a generated layer with a table of user choices. Reading the
/// binding yields one row per auto row, each overridable column taken from
/// the matching override row when it holds a value.
#[derive(Debug, Clone, PartialEq)]
pub struct OverrideBinding {
    pub name: String,
    pub auto: String,
    pub override_layer: String,
    pub keys: Vec<String>,
    /// Attribute names; `"geometry"` stands for the geometry column.
    pub columns: Vec<String>,
    /// Boolean column that, when false in the merged row, blanks the geometry.
    pub gate: Option<String>,
}

impl OverrideBinding {
    pub fn new(name: &str, auto: &str, override_layer: &str, keys: &[&str], columns: &[&str]) -> Self {
        OverrideBinding {
            name: name.to_string(),
            auto: auto.to_string(),
            override_layer: override_layer.to_string(),
            keys: keys.iter().map(|s| s.to_string()).collect(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            gate: None,
        }
    }

    pub fn gated_by(mut self, column: &str) -> Self {
        self.gate = Some(column.to_string());
        self
    }

    pub fn key_of(&self, f: &Feature) -> Vec<String> {
        override_key(f, &self.keys)
    }

    fn index<'a>(&self, overrides: &'a Layer) -> BTreeMap<Vec<String>, &'a Feature> {
        let mut idx = BTreeMap::new();
        for f in overrides.features() {
            // Lowest id wins should duplicates ever exist.
            idx.entry(self.key_of(f)).or_insert(f);
        }
        idx
    }

    pub(crate) fn merge(&self, auto: &Layer, overrides: &Layer) -> Vec<Feature> {
        let idx = self.index(overrides);
        auto.features()
            .map(|row| merge_row(self, row, idx.get(&self.key_of(row)).copied()))
            .collect()
    }

    pub(crate) fn merge_one(&self, row: &Feature, overrides: &Layer) -> Feature {
        let key = self.key_of(row);
        let over = overrides.features().find(|o| self.key_of(o) == key);
        merge_row(self, row, over)
    }
}

/// Key tuple rendered as text so that rows compare without float ordering.
pub fn override_key(f: &Feature, keys: &[String]) -> Vec<String> {
    keys.iter()
        .map(|k| match f.get(k) {
            Value::Real(v) if v.fract() == 0.0 => format!("{}", *v as i64),
            v => v.to_string(),
        })
        .collect()
}

/// Column-wise first-non-null of `over` and `auto`.
pub fn merge_row(binding: &OverrideBinding, auto: &Feature, over: Option<&Feature>) -> Feature {
    let mut out = auto.clone();
    if let Some(o) = over {
        for c in &binding.columns {
            if c == "geometry" {
                if o.geometry.is_some() {
                    out.geometry = o.geometry.clone();
                }
            } else if !o.get(c).is_null() {
                out.attributes.insert(c.clone(), o.get(c).clone());
            }
        }
    }
    if let Some(g) = &binding.gate {
        if out.get(g) == &Value::Boolean(false) {
            out.geometry = None;
        }
    }
    out
}
