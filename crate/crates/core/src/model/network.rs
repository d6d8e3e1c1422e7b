use std::collections::BTreeMap;

use streetbase_geom::{Point, Polyline};

use super::names::{ROAD_AXIS, ROAD_NODE};
use crate::store::{Feature, FeatureId, Store};

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: FeatureId,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: FeatureId,
    pub start: FeatureId,
    pub end: FeatureId,
    pub axis: Polyline,
    pub width: f64,
    pub lane_count: i64,
}

impl Edge {
    pub fn from_feature(f: &Feature) -> Option<Edge> {
        Some(Edge {
            id: f.id,
            start: f.fid("start_node")?,
            end: f.fid("end_node")?,
            axis: f.polyline_geometry()?.clone(),
            width: f.real("width")?,
            lane_count: f.int("lane_count")?,
        })
    }

    pub fn length(&self) -> f64 {
        self.axis.length()
    }

    /// The axis oriented away from `node`.
    pub fn outward(&self, node: FeatureId) -> Polyline {
        if node == self.start {
            self.axis.clone()
        } else {
            self.axis.reversed()
        }
    }

    pub fn other(&self, node: FeatureId) -> FeatureId {
        if node == self.start {
            self.end
        } else {
            self.start
        }
    }

    pub fn touches(&self, node: FeatureId) -> bool {
        self.start == node || self.end == node
    }
}

/// Snapshot of the road-axis graph.
#[derive(Debug, Clone, Default)]
pub struct Network {
    pub nodes: BTreeMap<FeatureId, Node>,
    pub edges: BTreeMap<FeatureId, Edge>,
    incidence: BTreeMap<FeatureId, Vec<FeatureId>>,
}

impl Network {
    pub fn load(store: &Store) -> Network {
        let mut net = Network::default();
        if let Ok(layer) = store.layer(ROAD_NODE) {
            for f in layer.features() {
                if let Some(p) = f.point_geometry() {
                    net.nodes.insert(f.id, Node { id: f.id, position: *p });
                }
            }
        }
        if let Ok(layer) = store.layer(ROAD_AXIS) {
            for f in layer.features() {
                if let Some(e) = Edge::from_feature(f) {
                    net.edges.insert(e.id, e);
                }
            }
        }
        for e in net.edges.values() {
            net.incidence.entry(e.start).or_default().push(e.id);
            if e.end != e.start {
                net.incidence.entry(e.end).or_default().push(e.id);
            }
        }
        let edges = &net.edges;
        for (node, list) in net.incidence.iter_mut() {
            list.sort_by(|a, b| {
                let aa = outward_angle(&edges[a], *node);
                let ab = outward_angle(&edges[b], *node);
                aa.total_cmp(&ab).then(a.cmp(b))
            });
        }
        net
    }

    /// Incident edges in counter-clockwise order of their outward direction.
    pub fn incident(&self, node: FeatureId) -> &[FeatureId] {
        self.incidence.get(&node).map_or(&[], Vec::as_slice)
    }

    pub fn degree(&self, node: FeatureId) -> usize {
        self.incident(node).len()
    }
}

/// Direction (radians) in which `edge` leaves `node`.
pub fn outward_angle(edge: &Edge, node: FeatureId) -> f64 {
    let v = edge.axis.vertices();
    if node == edge.start {
        (v[1] - v[0]).angle()
    } else {
        let n = v.len();
        (v[n - 2] - v[n - 1]).angle()
    }
}
