//! Store-wide sweeps over the street model.

use super::layout::{border, MAX_LIMIT_FRACTION};
use super::names::*;
use super::network::Network;
use super::regen::plan_mismatches;
use super::topology::crosses_network;
use crate::store::Store;

/// Columns holding road-axis ids, per layer. Objects may drop theirs.
const EDGE_REFS: [(&str, &[&str]); 9] = [
    (INTERSECTION_LIMIT, &["edge_id"]),
    (CORNER_RADIUS, &["edge_a", "edge_b"]),
    (SECTION_SURFACE, &["edge_id"]),
    (LANE, &["edge_id"]),
    (LANE_OVERRIDE, &["edge_id"]),
    (INTERCONNECTION, &["from_edge", "to_edge"]),
    (INTERCONNECTION_OVERRIDE, &["from_edge", "to_edge"]),
    (STREET_OBJECT, &["ref_edge"]),
    (PEDESTRIAN_CROSSING, &["ref_edge"]),
];

const NODE_REFS: [&str; 5] = [
    INTERSECTION_LIMIT,
    CORNER_RADIUS,
    INTERSECTION_SURFACE,
    INTERCONNECTION,
    INTERCONNECTION_OVERRIDE,
];

/// Every schema row, reference, topology and geometry violation, as text.
pub fn violations(store: &Store) -> Vec<String> {
    let mut out = Vec::new();
    schema_violations(store, &mut out);
    let net = Network::load(store);
    network_violations(store, &net, &mut out);
    reference_violations(store, &net, &mut out);
    limit_violations(store, &net, &mut out);
    tangency_violations(store, &net, &mut out);
    out.extend(plan_mismatches(store));
    out
}

pub fn schema_violations(store: &Store, out: &mut Vec<String>) {
    for layer in store.layers() {
        for f in layer.features() {
            if let Err(e) = layer.schema().normalize(f.clone()) {
                out.push(format!("{} row {}: {e}", layer.schema().name, f.id));
            }
        }
    }
}

pub fn network_violations(store: &Store, net: &Network, out: &mut Vec<String>) {
    let Ok(axes) = store.layer(ROAD_AXIS) else { return };
    for f in axes.features() {
        let Some(e) = net.edges.get(&f.id) else {
            out.push(format!("road_axis {} is malformed", f.id));
            continue;
        };
        if !(e.width > 0.0) {
            out.push(format!("road_axis {} has width {}", e.id, e.width));
        }
        for (end, p) in [(e.start, e.axis.first()), (e.end, e.axis.last())] {
            match net.nodes.get(&end) {
                None => out.push(format!("road_axis {} references missing node {end}", e.id)),
                Some(n) if n.position.distance(&p) > 1e-9 => {
                    out.push(format!("road_axis {} does not end on node {end}", e.id))
                }
                Some(_) => {}
            }
        }
        let later: Vec<u64> = net.edges.keys().copied().filter(|k| *k <= e.id).collect();
        if crosses_network(net, &e.axis, e.start, e.end, &later) {
            out.push(format!("road_axis {} crosses another axis", e.id));
        }
    }
    let nodes: Vec<_> = net.nodes.values().collect();
    let tol = store.config().snap_tolerance_m;
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            if a.position.distance(&b.position) <= tol {
                out.push(format!("road nodes {} and {} are within snap tolerance", a.id, b.id));
            }
        }
    }
}

pub fn reference_violations(store: &Store, net: &Network, out: &mut Vec<String>) {
    for (layer, columns) in EDGE_REFS {
        let Ok(l) = store.layer(layer) else { continue };
        for f in l.features() {
            for c in columns {
                if let Some(e) = f.fid(c) {
                    if !net.edges.contains_key(&e) {
                        out.push(format!("{layer} row {} references missing road axis {e}", f.id));
                    }
                }
            }
        }
    }
    for layer in NODE_REFS {
        let Ok(l) = store.layer(layer) else { continue };
        for f in l.features() {
            if let Some(n) = f.fid("node_id") {
                if !net.nodes.contains_key(&n) {
                    out.push(format!("{layer} row {} references missing node {n}", f.id));
                }
            }
        }
    }
}

pub fn limit_violations(store: &Store, net: &Network, out: &mut Vec<String>) {
    let Ok(l) = store.layer(INTERSECTION_LIMIT) else { return };
    for f in l.features() {
        let (Some(e), Some(s)) = (f.fid("edge_id").and_then(|e| net.edges.get(&e)), f.real("s")) else {
            continue;
        };
        if !(s > 0.0 && s <= MAX_LIMIT_FRACTION * e.length() + 1e-9) {
            out.push(format!("intersection_limit {} has s = {s} on an axis of length {}", f.id, e.length()));
        }
    }
}

pub fn tangency_violations(store: &Store, net: &Network, out: &mut Vec<String>) {
    let Ok(l) = store.layer(CORNER_RADIUS) else { return };
    for f in l.features() {
        let Some(r) = f.real("effective_r") else { continue };
        let (Some(n), Some(a), Some(b), Some(c)) = (
            f.fid("node_id"),
            f.fid("edge_a").and_then(|e| net.edges.get(&e)),
            f.fid("edge_b").and_then(|e| net.edges.get(&e)),
            f.point_geometry(),
        ) else {
            continue;
        };
        let da = border(&a.outward(n), a.width / 2.0).distance_to(c);
        let db = border(&b.outward(n), -b.width / 2.0).distance_to(c);
        let tol = 1e-9 * r.max(1.0);
        if (da - r).abs() > tol || (db - r).abs() > tol {
            out.push(format!("corner_radius {} is not tangent: r = {r}, distances {da} and {db}", f.id));
        }
    }
}
