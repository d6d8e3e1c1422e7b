//! Project directories: `manifest.json` plus `layers/<name>.geojson`.

use std::fs;
use std::path::Path;

use serde_json::{json, Value as Json};

use crate::config::Config;
use crate::error::EngineError;
use crate::store::{Feature, Schema, Store};
use crate::trigger::Result;

const FORMAT: u64 = 1;

fn io_err(path: &Path, e: impl std::fmt::Display) -> EngineError {
    EngineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn parse_err(path: &Path, line: usize, column: usize, message: impl Into<String>) -> EngineError {
    EngineError::Parse {
        file: path.display().to_string(),
        line,
        column,
        message: message.into(),
    }
}

fn manifest(store: &Store) -> Json {
    let reg = store.registry();
    let layers: Vec<Json> = store
        .layers()
        .map(|l| {
            let mut v = serde_json::to_value(l.schema()).expect("schema serializes");
            v["next_id"] = json!(l.next_id());
            v
        })
        .collect();
    let views: Vec<Json> = reg
        .views()
        .map(|v| {
            let handlers: serde_json::Map<String, Json> = v
                .handlers
                .iter()
                .map(|(k, h)| (k.as_str().to_string(), json!(h)))
                .collect();
            json!({"name": v.name, "base": v.base, "columns": v.columns, "handlers": handlers})
        })
        .collect();
    let bindings: Vec<Json> = reg
        .bindings()
        .map(|b| {
            json!({
                "name": b.name, "auto": b.auto, "override": b.override_layer,
                "keys": b.keys, "columns": b.columns, "gate": b.gate,
            })
        })
        .collect();
    let derived: Vec<Json> = reg
        .derived()
        .map(|d| json!({"name": d.schema.name, "handler": d.handler}))
        .collect();
    json!({
        "format": FORMAT,
        "config": store.config(),
        "last_seq": store.last_seq(),
        "last_set": store.last_set(),
        "layers": layers,
        "views": views,
        "bindings": bindings,
        "derived": derived,
        "triggers": reg.trigger_names(),
    })
}

/// One feature per line so that parse errors point at the feature.
pub fn layer_to_geojson(features: &[Feature]) -> String {
    let mut out = String::from("{\"type\":\"FeatureCollection\",\"features\":[\n");
    for (i, f) in features.iter().enumerate() {
        out.push_str(&f.to_geojson().to_string());
        if i + 1 < features.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("]}\n");
    out
}

pub fn save_project(store: &Store, dir: &Path) -> Result<()> {
    let layers_dir = dir.join("layers");
    fs::create_dir_all(&layers_dir).map_err(|e| io_err(&layers_dir, e))?;
    let text = serde_json::to_string_pretty(&manifest(store)).expect("manifest serializes") + "\n";
    let path = dir.join("manifest.json");
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    for layer in store.layers() {
        let path = layers_dir.join(format!("{}.geojson", layer.schema().name));
        let features: Vec<Feature> = layer.features().cloned().collect();
        fs::write(&path, layer_to_geojson(&features)).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

/// Reads the configuration stored in a project manifest.
pub fn read_config(dir: &Path) -> Result<Config> {
    let (path, m) = read_manifest(dir)?;
    serde_json::from_value(m.get("config").cloned().unwrap_or(json!({})))
        .map_err(|e| parse_err(&path, 1, 1, format!("config: {e}")))
}

fn read_manifest(dir: &Path) -> Result<(std::path::PathBuf, Json)> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let m: Json = serde_json::from_str(&text).map_err(|e| parse_err(&path, e.line(), e.column(), e.to_string()))?;
    Ok((path, m))
}

/// Loads a project. `install` registers layers and behaviour on the fresh
/// store; the manifest must agree with what it registers.
pub fn load_project(
    dir: &Path,
    config: Option<Config>,
    install: impl FnOnce(&mut Store) -> Result<()>,
) -> Result<Store> {
    let (path, m) = read_manifest(dir)?;
    if m.get("format").and_then(Json::as_u64) != Some(FORMAT) {
        return Err(parse_err(&path, 1, 1, "unsupported manifest format"));
    }
    let config = match config {
        Some(c) => c,
        None => serde_json::from_value(m.get("config").cloned().unwrap_or(json!({})))
            .map_err(|e| parse_err(&path, 1, 1, format!("config: {e}")))?,
    };
    let mut store = Store::new(config);
    install(&mut store)?;

    let list = |key: &str| m.get(key).and_then(Json::as_array).cloned().unwrap_or_default();
    let mut next_ids = Vec::new();
    for l in list("layers") {
        let next = l.get("next_id").and_then(Json::as_u64).unwrap_or(1);
        let mut l = l.clone();
        if let Some(o) = l.as_object_mut() {
            o.remove("next_id");
        }
        let schema: Schema =
            serde_json::from_value(l).map_err(|e| parse_err(&path, 1, 1, format!("layer schema: {e}")))?;
        match store.layer(&schema.name) {
            Ok(existing) if existing.schema() != &schema => {
                return Err(EngineError::Misconfigured(format!(
                    "schema of {} differs from the installed model",
                    schema.name
                )))
            }
            Ok(_) => {}
            Err(_) => store.create_layer(schema.clone())?,
        }
        next_ids.push((schema.name, next));
    }
    let reg = store.registry().clone();
    let names_in = |key: &str| -> Vec<String> {
        list(key)
            .iter()
            .filter_map(|v| v.get("name").and_then(Json::as_str).map(str::to_string))
            .collect()
    };
    for v in names_in("views") {
        if !reg.views.contains_key(&v) {
            return Err(EngineError::Misconfigured(format!("view {v} is not registered")));
        }
    }
    for b in names_in("bindings") {
        if !reg.bindings.contains_key(&b) {
            return Err(EngineError::Misconfigured(format!("binding {b} is not registered")));
        }
    }
    let known = reg.trigger_names();
    for t in list("triggers") {
        let t = t.as_str().unwrap_or_default();
        if !known.iter().any(|k| k == t) {
            return Err(EngineError::Misconfigured(format!("trigger {t} is not registered")));
        }
    }

    for (name, next) in next_ids {
        let fpath = dir.join("layers").join(format!("{name}.geojson"));
        let text = fs::read_to_string(&fpath).map_err(|e| io_err(&fpath, e))?;
        let fc: Json =
            serde_json::from_str(&text).map_err(|e| parse_err(&fpath, e.line(), e.column(), e.to_string()))?;
        if fc.get("type").and_then(Json::as_str) != Some("FeatureCollection") {
            return Err(parse_err(&fpath, 1, 1, "expected a FeatureCollection"));
        }
        let features = fc.get("features").and_then(Json::as_array).cloned().unwrap_or_default();
        for (i, f) in features.iter().enumerate() {
            // Saved files hold one feature per line after the header line.
            let line = i + 2;
            let feature = Feature::from_geojson(f).map_err(|e| parse_err(&fpath, line, 1, e))?;
            store
                .load_feature(&name, feature)
                .map_err(|e| parse_err(&fpath, line, 1, e.to_string()))?;
        }
        store.set_next_id(&name, next)?;
    }
    let counter = |k: &str| m.get(k).and_then(Json::as_u64).unwrap_or(0);
    store.restore_counters(counter("last_seq"), counter("last_set"));
    Ok(store)
}
