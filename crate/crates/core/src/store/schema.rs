use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::feature::{Feature, Geometry};
use super::value::{AttrType, Value};
use crate::error::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Point,
    Polyline,
    Polygon,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrDef {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: AttrType,
    pub nullable: bool,
}

/// Layer definition. `generated` layers only accept system writes; users
/// reach them through proxy views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    pub geometry: GeometryKind,
    #[serde(default)]
    pub geometry_nullable: bool,
    pub attributes: Vec<AttrDef>,
    #[serde(default)]
    pub generated: bool,
}

impl Schema {
    pub fn new(name: &str, geometry: GeometryKind) -> Self {
        Schema {
            name: name.to_string(),
            geometry,
            geometry_nullable: geometry == GeometryKind::None,
            attributes: Vec::new(),
            generated: false,
        }
    }

    pub fn attr(mut self, name: &str, ty: AttrType) -> Self {
        self.attributes.push(AttrDef {
            name: name.to_string(),
            ty,
            nullable: false,
        });
        self
    }

    pub fn nullable(mut self, name: &str, ty: AttrType) -> Self {
        self.attributes.push(AttrDef {
            name: name.to_string(),
            ty,
            nullable: true,
        });
        self
    }

    pub fn optional_geometry(mut self) -> Self {
        self.geometry_nullable = true;
        self
    }

    pub fn generated(mut self) -> Self {
        self.generated = true;
        self
    }

    pub fn attribute(&self, name: &str) -> Option<&AttrDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn validate_definition(&self) -> Result<(), EngineError> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            return Err(EngineError::invalid(&self.name, "layer name must be an identifier"));
        }
        let mut seen = BTreeSet::new();
        for a in &self.attributes {
            if !seen.insert(a.name.as_str()) {
                return Err(EngineError::invalid(
                    &self.name,
                    format!("duplicate attribute {}", a.name),
                ));
            }
        }
        Ok(())
    }

    /// Checks `feature` against the schema and returns it normalized to
    /// exactly the declared attributes.
    pub fn normalize(&self, mut feature: Feature) -> Result<Feature, EngineError> {
        match (&feature.geometry, self.geometry) {
            (None, _) if self.geometry_nullable || self.geometry == GeometryKind::None => {}
            (None, kind) => {
                return Err(EngineError::invalid(
                    &self.name,
                    format!("{kind:?} geometry required").to_lowercase(),
                ))
            }
            (Some(g), kind) if g.kind() != kind => {
                return Err(EngineError::invalid(
                    &self.name,
                    format!("expected {:?} geometry, got {:?}", kind, g.kind()).to_lowercase(),
                ))
            }
            _ => {}
        }
        if let Some(Geometry::Point(p)) = &feature.geometry {
            if !p.is_finite() {
                return Err(EngineError::invalid(&self.name, "non-finite coordinates"));
            }
        }
        let mut attrs = std::mem::take(&mut feature.attributes);
        let mut out = BTreeMap::new();
        for def in &self.attributes {
            let v = attrs.remove(&def.name).unwrap_or(Value::Null);
            let v = v.coerce(def.ty).ok_or_else(|| {
                EngineError::invalid(&self.name, format!("attribute {} must be {:?}", def.name, def.ty).to_lowercase())
            })?;
            if v.is_null() && !def.nullable {
                return Err(EngineError::invalid(
                    &self.name,
                    format!("attribute {} is required", def.name),
                ));
            }
            out.insert(def.name.clone(), v);
        }
        if let Some(name) = attrs.keys().next() {
            return Err(EngineError::invalid(&self.name, format!("unknown attribute {name}")));
        }
        feature.attributes = out;
        Ok(feature)
    }
}
