//! Conservative editing of the road-axis graph.
//!
//! Nodes and axes are only reachable through `edit_node` and `edit_edge`.
//! Edits that would need more than one edge split are refused; the only
//! automatic split is a node dropped on exactly one axis.

use streetbase_geom::{GeomError, Point, Polyline};

use super::names::*;
use super::network::{Edge, Network};
use crate::error::EngineError;
use crate::store::{ChangeRecord, Feature, FeatureId, Geometry};
use crate::trigger::{Result, Tx};

/// Below this abscissa distance from an end, a split point counts as the end.
const SPLIT_EPS: f64 = 1e-9;

fn ambiguous(message: impl Into<String>) -> EngineError {
    EngineError::AmbiguousEdit(message.into())
}

fn node_near(net: &Network, p: &Point, tol: f64, except: Option<FeatureId>) -> Option<FeatureId> {
    net.nodes
        .values()
        .filter(|n| Some(n.id) != except)
        .map(|n| (n.id, n.position.distance(p)))
        .filter(|(_, d)| *d <= tol)
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(id, _)| id)
}

/// Whether `axis` between `start` and `end` meets another edge anywhere but
/// at a node both share.
pub fn crosses_network(net: &Network, axis: &Polyline, start: FeatureId, end: FeatureId, skip: &[FeatureId]) -> bool {
    let mine = [start, end];
    for other in net.edges.values().filter(|e| !skip.contains(&e.id)) {
        for (p, _, _) in axis.intersections(&other.axis) {
            let at_shared_node = [other.start, other.end]
                .iter()
                .filter(|n| mine.contains(n))
                .filter_map(|n| net.nodes.get(n))
                .any(|n| n.position.distance(&p) <= 1e-9);
            if !at_shared_node {
                return true;
            }
        }
    }
    false
}

fn edge_row(axis: Polyline, start: FeatureId, end: FeatureId, width: f64, lane_count: i64) -> Feature {
    Feature::polyline(axis)
        .with("start_node", start)
        .with("end_node", end)
        .with("width", width)
        .with("lane_count", lane_count)
}

/// Splits `edge` at abscissa `s`; returns the new node and both halves.
/// The first half keeps the edge id.
pub fn split_edge(tx: &mut Tx<'_>, edge_id: FeatureId, s: f64) -> Result<(FeatureId, FeatureId, FeatureId)> {
    let net = Network::load(tx.store());
    let edge = net
        .edges
        .get(&edge_id)
        .ok_or_else(|| EngineError::NotFound(format!("road axis {edge_id}")))?
        .clone();
    let len = edge.length();
    if !(s > SPLIT_EPS && s < len - SPLIT_EPS) {
        return Err(GeomError::OutOfRange {
            what: "split abscissa",
            value: s,
            min: 0.0,
            max: len,
        }
        .into());
    }
    let (p, _) = edge.axis.point_at(s, 0.0)?;
    let node = tx.insert(ROAD_NODE, Feature::point(p))?;
    let first = edge.axis.sub_polyline(0.0, s)?;
    let second = edge.axis.sub_polyline(s, len)?;
    let second_id = tx.insert(
        ROAD_AXIS,
        edge_row(second, node, edge.end, edge.width, edge.lane_count),
    )?;
    let mut row = tx
        .get(ROAD_AXIS, edge_id)
        .cloned()
        .ok_or_else(|| EngineError::NotFound(format!("road axis {edge_id}")))?;
    row.geometry = Some(Geometry::Polyline(first));
    row.set("end_node", node);
    tx.update(ROAD_AXIS, row)?;
    rekey_after_split(tx, &edge, s, second_id)?;
    Ok((node, edge_id, second_id))
}

/// Moves everything that belonged to the far part of a split edge onto
/// the new second half.
fn rekey_after_split(tx: &mut Tx<'_>, edge: &Edge, s: f64, second: FeatureId) -> Result<()> {
    let e = edge.id;
    for layer in [STREET_OBJECT, PEDESTRIAN_CROSSING] {
        let moving: Vec<Feature> = tx
            .layer(layer)?
            .features()
            .filter(|f| f.fid("ref_edge") == Some(e) && f.real("s").is_some_and(|v| v >= s))
            .cloned()
            .collect();
        for mut f in moving {
            let v = f.real("s").unwrap_or(s);
            f.set("ref_edge", second);
            f.set("s", v - s);
            tx.update(layer, f)?;
        }
    }
    let end = edge.end;
    let at_end = |f: &Feature| f.fid("node_id") == Some(end);
    let renamed: Vec<(&str, Feature)> = [
        (INTERSECTION_LIMIT, &["edge_id"][..]),
        (CORNER_RADIUS, &["edge_a", "edge_b"][..]),
        (INTERCONNECTION_OVERRIDE, &["from_edge", "to_edge"][..]),
    ]
    .iter()
    .flat_map(|(layer, cols)| {
        tx.layer(layer)
            .map(|l| {
                l.features()
                    .filter(|f| at_end(f) && cols.iter().any(|c| f.fid(c) == Some(e)))
                    .map(|f| {
                        let mut f = f.clone();
                        for c in *cols {
                            if f.fid(c) == Some(e) {
                                f.set(c, second);
                            }
                        }
                        (*layer, f)
                    })
                    .collect::<Vec<_>>()
            })
            .unwrap_or_default()
    })
    .collect();
    for (layer, f) in renamed {
        tx.update(layer, f)?;
    }
    // Lane directions hold on both halves; custom shapes stay on the first.
    let lane_overrides: Vec<Feature> = tx
        .layer(LANE_OVERRIDE)?
        .features()
        .filter(|f| f.fid("edge_id") == Some(e) && f.text("direction").is_some())
        .cloned()
        .collect();
    for o in lane_overrides {
        let copy = Feature::new(None)
            .with("edge_id", second)
            .with("lane_index", o.get("lane_index").clone())
            .with("direction", o.get("direction").clone());
        tx.insert(LANE_OVERRIDE, copy)?;
    }
    Ok(())
}

/// User insert on `edit_node`.
pub fn node_insert(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let input = rec.new.as_ref().expect("view inserts carry a payload");
    let p = *input
        .point_geometry()
        .ok_or_else(|| EngineError::invalid(EDIT_NODE, "a node is a point"))?;
    let tol = tx.config().snap_tolerance_m;
    let net = Network::load(tx.store());
    if node_near(&net, &p, tol, None).is_some() {
        return Err(ambiguous("near existing node"));
    }
    let candidates: Vec<(FeatureId, f64)> = net
        .edges
        .values()
        .filter_map(|e| {
            let proj = e.axis.project(&p);
            (proj.distance <= tol && proj.s > SPLIT_EPS && proj.s < e.length() - SPLIT_EPS).then_some((e.id, proj.s))
        })
        .collect();
    match candidates.as_slice() {
        [] => Ok(Some(tx.insert(ROAD_NODE, Feature::point(p))?)),
        [(e, s)] => Ok(Some(split_edge(tx, *e, *s)?.0)),
        _ => Err(ambiguous("multiple candidate edges")),
    }
}

/// Replaces the end vertex of `axis` touching `node`.
fn moved_axis(edge: &Edge, node: FeatureId, p: Point) -> Result<Polyline> {
    let mut v = edge.axis.vertices().to_vec();
    let n = v.len();
    if edge.start == node {
        v[0] = p;
    }
    if edge.end == node {
        v[n - 1] = p;
    }
    Polyline::new(v).map_err(|_| ambiguous(format!("moving the node collapses road axis {}", edge.id)))
}

/// User update on `edit_node`: a move drags the ends of its axes along.
pub fn node_update(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let old = rec.old.as_ref().expect("view updates carry the current row");
    let new = rec.new.as_ref().expect("view updates carry a payload");
    let id = old.id;
    let Some(p) = new.point_geometry().copied() else {
        return Ok(Some(id));
    };
    if old.point_geometry().is_some_and(|q| q.same_xy(&p)) {
        return Ok(Some(id));
    }
    let tol = tx.config().snap_tolerance_m;
    let mut net = Network::load(tx.store());
    if node_near(&net, &p, tol, Some(id)).is_some() {
        return Err(ambiguous("near existing node"));
    }
    let incident: Vec<FeatureId> = net.incident(id).to_vec();
    let mut moved = Vec::new();
    for e in &incident {
        let edge = &net.edges[e];
        moved.push((edge.id, moved_axis(edge, id, p)?));
    }
    if let Some(n) = net.nodes.get_mut(&id) {
        n.position = p;
    }
    for (e, axis) in &moved {
        net.edges.get_mut(e).expect("incident edge").axis = axis.clone();
    }
    for (e, axis) in &moved {
        let edge = &net.edges[e];
        if crosses_network(&net, axis, edge.start, edge.end, &[*e]) {
            return Err(ambiguous(format!(
                "moving the node makes road axis {e} cross another axis"
            )));
        }
    }
    let mut row = old.clone();
    row.geometry = Some(Geometry::Point(p));
    tx.update(ROAD_NODE, row)?;
    for (e, axis) in moved {
        let mut f = tx.get(ROAD_AXIS, e).cloned().expect("incident edge stored");
        f.geometry = Some(Geometry::Polyline(axis));
        tx.update(ROAD_AXIS, f)?;
    }
    Ok(Some(id))
}

/// User delete on `edit_node`: only isolated nodes go.
pub fn node_delete(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let id = rec.id.expect("view deletes carry an id");
    let net = Network::load(tx.store());
    let degree = net.degree(id);
    if degree > 0 {
        return Err(ambiguous(format!(
            "node {id} still has {degree} road axes; delete them first"
        )));
    }
    tx.delete(ROAD_NODE, id)?;
    Ok(Some(id))
}

/// Snaps both ends of a drawn axis onto nodes.
fn snapped(net: &Network, line: &Polyline, tol: f64) -> Result<(Polyline, FeatureId, FeatureId)> {
    let start = node_near(net, &line.first(), tol, None).ok_or_else(|| ambiguous("endpoint not on a node"))?;
    let end = node_near(net, &line.last(), tol, None).ok_or_else(|| ambiguous("endpoint not on a node"))?;
    if start == end {
        return Err(ambiguous("a road axis must join two distinct nodes"));
    }
    let mut v = line.vertices().to_vec();
    let n = v.len();
    v[0] = net.nodes[&start].position;
    v[n - 1] = net.nodes[&end].position;
    let axis = Polyline::new_dedup(v).map_err(|_| ambiguous("the road axis collapses once snapped to its nodes"))?;
    Ok((axis, start, end))
}

/// User insert on `edit_edge`.
pub fn edge_insert(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let input = rec.new.as_ref().expect("view inserts carry a payload");
    let line = input
        .polyline_geometry()
        .ok_or_else(|| EngineError::invalid(EDIT_EDGE, "a road axis is a line"))?;
    let net = Network::load(tx.store());
    let (axis, start, end) = snapped(&net, line, tx.config().snap_tolerance_m)?;
    if crosses_network(&net, &axis, start, end, &[]) {
        return Err(ambiguous("would require splitting edges"));
    }
    let width = input.real("width").unwrap_or(tx.config().default_width_m);
    let lanes = input.int("lane_count").unwrap_or(tx.config().default_lane_count);
    Ok(Some(tx.insert(ROAD_AXIS, edge_row(axis, start, end, width, lanes))?))
}

/// User update on `edit_edge`: reshaping, width and lane count.
pub fn edge_update(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let old = rec.old.as_ref().expect("view updates carry the current row");
    let new = rec.new.as_ref().expect("view updates carry a payload");
    let mut row = old.clone();
    for k in ["width", "lane_count"] {
        if !new.get(k).is_null() {
            row.set(k, new.get(k).clone());
        }
    }
    if let Some(line) = new.polyline_geometry() {
        if Some(line) != old.polyline_geometry() {
            let net = Network::load(tx.store());
            let (axis, start, end) = snapped(&net, line, tx.config().snap_tolerance_m)?;
            if crosses_network(&net, &axis, start, end, &[old.id]) {
                return Err(ambiguous("would require splitting edges"));
            }
            row.geometry = Some(Geometry::Polyline(axis));
            row.set("start_node", start);
            row.set("end_node", end);
        }
    }
    tx.update_if_changed(ROAD_AXIS, row)?;
    Ok(Some(old.id))
}

/// User delete on `edit_edge`; dependents follow through regeneration.
pub fn edge_delete(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let id = rec.id.expect("view deletes carry an id");
    tx.delete(ROAD_AXIS, id)?;
    Ok(Some(id))
}

/// Before-trigger on road axes: the width is a magnitude, a road has at
/// least one lane, and the ends sit on their nodes.
pub fn check_axis(tx: &mut Tx<'_>, rec: &mut ChangeRecord) -> Result<()> {
    let Some(f) = rec.new.as_mut() else { return Ok(()) };
    let width = f.real("width").unwrap_or(0.0).abs();
    if !(width > 0.0) || !width.is_finite() {
        return Err(EngineError::rejected(ROAD_AXIS, "the road width must be positive"));
    }
    f.set("width", width);
    if f.int("lane_count").unwrap_or(0) < 1 {
        return Err(EngineError::rejected(ROAD_AXIS, "a road has at least one lane"));
    }
    let (Some(start), Some(end)) = (f.fid("start_node"), f.fid("end_node")) else {
        return Err(EngineError::rejected(ROAD_AXIS, "start_node and end_node are required"));
    };
    let Some(axis) = f.polyline_geometry() else {
        return Err(EngineError::rejected(ROAD_AXIS, "a road axis is a line"));
    };
    for (node, p) in [(start, axis.first()), (end, axis.last())] {
        let pos = tx
            .get(ROAD_NODE, node)
            .and_then(|n| n.point_geometry().copied())
            .ok_or_else(|| EngineError::rejected(ROAD_AXIS, format!("node {node} does not exist")))?;
        if pos.distance(&p) > 1e-9 {
            return Err(EngineError::rejected(
                ROAD_AXIS,
                format!("the axis does not end on node {node}"),
            ));
        }
    }
    Ok(())
}
