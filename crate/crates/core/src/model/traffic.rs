//! Lanes and lane-to-lane interconnections.

use std::collections::{BTreeMap, BTreeSet};

use streetbase_geom::{bezier_polyline, line_intersection, Point, Polyline, Vec2};

use super::layout::clipped_axis;
use super::names::*;
use super::network::{Edge, Network};
use super::regen::{regenerate, Dirty};
use crate::config::{Config, Handedness};
use crate::error::EngineError;
use crate::store::{ChangeRecord, Feature, FeatureId, Geometry, Store, Value};
use crate::trigger::{override_key, Result, Tx};

/// Samples per interconnection curve.
pub const CURVE_SEGMENTS: usize = 16;
/// Below this angle between end tangents the quadratic default is not used.
const MIN_QUADRATIC_ANGLE: f64 = 5.0 * std::f64::consts::PI / 180.0;

pub const FORWARD: &str = "forward";
pub const BACKWARD: &str = "backward";

pub const LANE_KEYS: [&str; 2] = ["edge_id", "lane_index"];
pub const INTERCONNECTION_KEYS: [&str; 5] = ["node_id", "from_edge", "from_lane", "to_edge", "to_lane"];

/// Offsets of each lane centre from the axis, left positive.
pub fn lane_offsets(width: f64, count: i64) -> Vec<f64> {
    let n = count.max(1);
    let lane = width / n as f64;
    (0..n).map(|i| (i as f64 - (n - 1) as f64 / 2.0) * lane).collect()
}

pub fn default_direction(offset: f64, traffic: Handedness) -> &'static str {
    let forward = match traffic {
        Handedness::Right => offset < 0.0,
        Handedness::Left => offset >= 0.0,
    };
    if forward {
        FORWARD
    } else {
        BACKWARD
    }
}

/// Generated lanes of one edge between its two limits.
pub fn auto_lanes(edge: &Edge, s_start: f64, s_end: f64, cfg: &Config) -> Vec<Feature> {
    let clip = clipped_axis(&edge.axis, s_start, s_end);
    lane_offsets(edge.width, edge.lane_count)
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let geometry = clip.as_ref().and_then(|c| c.offset(d).ok()).map(Geometry::Polyline);
            Feature::new(geometry)
                .with("edge_id", edge.id)
                .with("lane_index", i)
                .with("direction", default_direction(d, cfg.traffic))
        })
        .collect()
}

/// Implicit controls: the tangent-line intersection when it sits ahead of
/// both ends, otherwise a cubic with controls a third of the way along
/// each tangent.
pub fn default_controls(p: Point, u: Vec2, q: Point, v: Vec2) -> Vec<Point> {
    let (u, v) = (u.normalized(), v.normalized());
    let span = p.distance(&q);
    let angle = u.cross(v).atan2(u.dot(v)).abs();
    if angle >= MIN_QUADRATIC_ANGLE {
        if let Some((t, s)) = line_intersection(p, u, q, v) {
            let c = p + u * t;
            if t > 0.0 && s < 0.0 && c.distance(&p) <= 3.0 * span && c.distance(&q) <= 3.0 * span {
                return vec![p, c, q];
            }
        }
    }
    vec![p, p + u * (span / 3.0), q - v * (span / 3.0), q]
}

pub fn curve(controls: &[Point]) -> Option<Polyline> {
    let pts = bezier_polyline(controls, CURVE_SEGMENTS).ok()?;
    Polyline::new_dedup(pts).ok()
}

pub fn controls_to_text(controls: &[Point]) -> String {
    let coords: Vec<[f64; 2]> = controls.iter().map(|p| [p.x, p.y]).collect();
    serde_json::to_string(&coords).expect("finite coordinates serialize")
}

pub fn parse_controls(text: &str) -> std::result::Result<Vec<Point>, String> {
    let coords: Vec<[f64; 2]> =
        serde_json::from_str(text).map_err(|e| format!("controls must be a list of [x, y] pairs: {e}"))?;
    if !(2..=4).contains(&coords.len()) {
        return Err(format!("a curve takes 2 to 4 control points, got {}", coords.len()));
    }
    let pts: Vec<Point> = coords.iter().map(|c| Point::new(c[0], c[1])).collect();
    if pts.iter().any(|p| !p.is_finite()) {
        return Err("control points must be finite".into());
    }
    Ok(pts)
}

/// A lane end at a node, with the direction of travel there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneEnd {
    pub edge: FeatureId,
    pub lane: i64,
    pub point: Point,
    pub travel: Vec2,
}

/// Whether a merged lane enters `node`, and its end there with the
/// direction of travel. Lanes without geometry have no end.
pub fn lane_end(edge: &Edge, node: FeatureId, lane: &Feature) -> (bool, Option<LaneEnd>) {
    let forward = lane.text("direction") != Some(BACKWARD);
    let at_start = node == edge.start;
    let enters = forward != at_start;
    let end = lane.polyline_geometry().map(|g| {
        let v = g.vertices();
        let n = v.len();
        // Axis-wise direction at the end touching the node.
        let (point, along) = if at_start {
            (v[0], (v[1] - v[0]).normalized())
        } else {
            (v[n - 1], (v[n - 1] - v[n - 2]).normalized())
        };
        LaneEnd {
            edge: edge.id,
            lane: lane.int("lane_index").unwrap_or(0),
            point,
            travel: if forward { along } else { -along },
        }
    });
    (enters, end)
}

/// Default interconnections at a node: every incoming lane to every
/// outgoing lane of another edge.
pub fn node_interconnections(
    net: &Network,
    node: FeatureId,
    merged_lanes: &BTreeMap<FeatureId, Vec<Feature>>,
) -> Vec<Feature> {
    let mut ins: Vec<(FeatureId, i64, Option<LaneEnd>)> = Vec::new();
    let mut outs: Vec<(FeatureId, i64, Option<LaneEnd>)> = Vec::new();
    for eid in net.incident(node) {
        let edge = &net.edges[eid];
        let lanes = merged_lanes.get(eid).map_or(&[][..], Vec::as_slice);
        let mut indexed: Vec<&Feature> = lanes.iter().collect();
        indexed.sort_by_key(|l| l.int("lane_index"));
        for lane in indexed {
            let (enters, end) = lane_end(edge, node, lane);
            let index = lane.int("lane_index").unwrap_or(0);
            if enters {
                ins.push((edge.id, index, end));
            } else {
                outs.push((edge.id, index, end));
            }
        }
    }
    let mut rows = Vec::new();
    for (fe, fl, from) in &ins {
        for (te, tl, to) in &outs {
            if fe == te {
                continue;
            }
            let (controls, geometry) = match (from, to) {
                (Some(a), Some(b)) => {
                    let c = default_controls(a.point, a.travel, b.point, b.travel);
                    let g = curve(&c).map(Geometry::Polyline);
                    (Value::Text(controls_to_text(&c)), g)
                }
                _ => (Value::Null, None),
            };
            rows.push(
                Feature::new(geometry)
                    .with("node_id", node)
                    .with("from_edge", *fe)
                    .with("from_lane", *fl)
                    .with("to_edge", *te)
                    .with("to_lane", *tl)
                    .with("allowed", true)
                    .with("controls", controls),
            );
        }
    }
    rows
}

/// Moves the first and last control of a user curve onto the current lane
/// ends; the geometry follows.
pub fn reanchor(over: &Feature, auto: &Feature) -> Feature {
    let mut out = over.clone();
    let Some(text) = over.text("controls") else {
        return out;
    };
    let ends = auto.text("controls").and_then(|t| parse_controls(t).ok());
    match (parse_controls(text), ends) {
        (Ok(mut c), Some(a)) => {
            let n = c.len();
            c[0] = a[0];
            c[n - 1] = a[a.len() - 1];
            out.set("controls", controls_to_text(&c));
            out.geometry = curve(&c).map(Geometry::Polyline);
        }
        _ => out.geometry = None,
    }
    out
}

fn find_override(tx: &Tx<'_>, layer: &str, keys: &[&str], row: &Feature) -> Result<Option<Feature>> {
    let keys: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
    let want = override_key(row, &keys);
    Ok(tx.layer(layer)?.features().find(|f| override_key(f, &keys) == want).cloned())
}

fn keys_unchanged(old: &Feature, new: &Feature, keys: &[&str], view: &str) -> Result<()> {
    for k in keys {
        let v = new.get(k);
        if !v.is_null() && v.as_f64() != old.get(k).as_f64() {
            return Err(EngineError::Unsupported(format!("{view}: key column {k} cannot be edited")));
        }
    }
    Ok(())
}

fn upsert_override(tx: &mut Tx<'_>, layer: &str, keys: &[&str], row: &Feature, mut changes: Feature) -> Result<()> {
    match find_override(tx, layer, keys, row)? {
        Some(mut existing) => {
            for (k, v) in changes.attributes {
                existing.attributes.insert(k, v);
            }
            if changes.geometry.is_some() {
                existing.geometry = changes.geometry.take();
            }
            tx.update_if_changed(layer, existing)?;
        }
        None => {
            for k in keys {
                changes.set(k, row.get(k).clone());
            }
            tx.insert(layer, changes)?;
        }
    }
    Ok(())
}

fn lane_dirty(row: &Feature) -> Dirty {
    let mut d = Dirty::default();
    if let Some(e) = row.fid("edge_id") {
        d.edges.insert(e);
    }
    d
}

/// User update on `edit_lane`: changed direction or geometry become overrides.
pub fn edit_lane_update(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let old = rec.old.as_ref().expect("view updates carry the current row");
    let new = rec.new.as_ref().expect("view updates carry a payload");
    keys_unchanged(old, new, &LANE_KEYS, EDIT_LANE)?;
    let mut changes = Feature::new(None);
    let mut changed = false;
    if let Some(dir) = new.text("direction") {
        if dir != FORWARD && dir != BACKWARD {
            return Err(EngineError::invalid(EDIT_LANE, format!("direction must be {FORWARD} or {BACKWARD}")));
        }
        if Some(dir) != old.text("direction") {
            changes.set("direction", dir);
            changed = true;
        }
    }
    if new.geometry.is_some() && new.geometry != old.geometry {
        if new.polyline_geometry().is_none() {
            return Err(EngineError::invalid(EDIT_LANE, "lane geometry must be a line"));
        }
        changes.geometry = new.geometry.clone();
        changed = true;
    }
    if changed {
        upsert_override(tx, LANE_OVERRIDE, &LANE_KEYS, old, changes)?;
        regenerate(tx, &lane_dirty(old))?;
    }
    Ok(Some(old.id))
}

/// User delete on `edit_lane`: forget the user's choices for that lane.
pub fn edit_lane_delete(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let old = rec.old.as_ref().expect("view deletes carry the current row");
    if let Some(o) = find_override(tx, LANE_OVERRIDE, &LANE_KEYS, old)? {
        tx.delete(LANE_OVERRIDE, o.id)?;
        regenerate(tx, &lane_dirty(old))?;
    }
    Ok(Some(old.id))
}

/// User delete on `edit_interconnection`: forbid a pristine connection,
/// or drop the user's choices when there are some.
pub fn edit_interconnection_delete(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let old = rec.old.as_ref().expect("view deletes carry the current row");
    match find_override(tx, INTERCONNECTION_OVERRIDE, &INTERCONNECTION_KEYS, old)? {
        Some(o) => tx.delete(INTERCONNECTION_OVERRIDE, o.id)?,
        None => {
            let mut f = Feature::new(None).with("allowed", false).with("controls", Value::Null);
            for k in INTERCONNECTION_KEYS {
                f.set(k, old.get(k).clone());
            }
            tx.insert(INTERCONNECTION_OVERRIDE, f)?;
        }
    }
    Ok(Some(old.id))
}

/// User update on `edit_interconnection`: `allowed` and `controls` edits.
pub fn edit_interconnection_update(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let old = rec.old.as_ref().expect("view updates carry the current row");
    let new = rec.new.as_ref().expect("view updates carry a payload");
    keys_unchanged(old, new, &INTERCONNECTION_KEYS, EDIT_INTERCONNECTION)?;
    let mut changes = Feature::new(None);
    let mut changed = false;
    if let Some(allowed) = new.flag("allowed") {
        if Some(allowed) != old.flag("allowed") {
            changes.set("allowed", allowed);
            changed = true;
        }
    }
    let new_controls = new.text("controls");
    if new_controls.is_some() && new_controls != old.text("controls") {
        let auto = tx
            .get(INTERCONNECTION, old.id)
            .cloned()
            .ok_or_else(|| EngineError::NotFound(format!("interconnection {}", old.id)))?;
        let mut c = parse_controls(new_controls.unwrap_or_default())
            .map_err(|m| EngineError::invalid(EDIT_INTERCONNECTION, m))?;
        let ends = auto
            .text("controls")
            .and_then(|t| parse_controls(t).ok())
            .ok_or_else(|| EngineError::Unsupported("interconnection has no lane ends to connect".into()))?;
        // Endpoints stay on the lanes; only inner controls move.
        let n = c.len();
        c[0] = ends[0];
        c[n - 1] = ends[ends.len() - 1];
        changes.set("controls", controls_to_text(&c));
        changes.geometry = curve(&c).map(Geometry::Polyline);
        changed = true;
    } else if new.geometry.is_some() && new.geometry != old.geometry {
        return Err(EngineError::AmbiguousEdit(
            "reshape an interconnection by editing its controls attribute".into(),
        ));
    }
    if changed {
        upsert_override(tx, INTERCONNECTION_OVERRIDE, &INTERCONNECTION_KEYS, old, changes)?;
    }
    Ok(Some(old.id))
}

/// Merged lanes of the given edges, as currently stored.
pub fn stored_merged_lanes(store: &Store, edges: &BTreeSet<FeatureId>) -> BTreeMap<FeatureId, Vec<Feature>> {
    let mut out: BTreeMap<FeatureId, Vec<Feature>> = BTreeMap::new();
    let Ok(merged) = store.read(LANE_MERGED) else {
        return out;
    };
    for f in merged {
        if let Some(e) = f.fid("edge_id") {
            if edges.contains(&e) {
                out.entry(e).or_default().push(f);
            }
        }
    }
    out
}
