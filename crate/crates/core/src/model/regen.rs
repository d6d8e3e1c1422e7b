//! Regeneration of the street model from the axis network.
//!
//! A change marks nodes and edges dirty. The closure (both nodes of a dirty
//! edge, every edge at a dirty node) is re-planned from scratch and the plan
//! is diffed against the stored rows, so rows outside the closure are never
//! written and rows inside it only when their content changes.

use std::collections::{BTreeMap, BTreeSet};

use super::layout::{layout_node, section_polygon, NodeLayout, UserChoices, DEAD_END_LIMIT};
use super::names::*;
use super::network::Network;
use super::objects::{crossing_of, crossing_row, resync_object};
use super::traffic::{auto_lanes, node_interconnections, reanchor, stored_merged_lanes, LANE_KEYS, INTERCONNECTION_KEYS};
use super::lane_binding;
use crate::store::{ChangeRecord, Feature, FeatureId, Geometry, Store};
use crate::trigger::{merge_row, override_key, Result, Tx};

/// Tolerance used when comparing a stored model with a fresh plan.
pub const CHECK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dirty {
    pub nodes: BTreeSet<FeatureId>,
    pub edges: BTreeSet<FeatureId>,
}

impl Dirty {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    pub fn nodes(ids: impl IntoIterator<Item = FeatureId>) -> Dirty {
        Dirty {
            nodes: ids.into_iter().collect(),
            edges: BTreeSet::new(),
        }
    }

    pub fn edges(ids: impl IntoIterator<Item = FeatureId>) -> Dirty {
        Dirty {
            nodes: BTreeSet::new(),
            edges: ids.into_iter().collect(),
        }
    }

    /// Dirty set of node and axis records, including the nodes an edge
    /// used to connect.
    pub fn from_records(records: &[ChangeRecord]) -> Dirty {
        let mut d = Dirty::default();
        for r in records {
            let Some(id) = r.id else { continue };
            if r.layer == ROAD_NODE {
                d.nodes.insert(id);
            } else if r.layer == ROAD_AXIS {
                d.edges.insert(id);
                for f in r.old.iter().chain(r.new.iter()) {
                    d.nodes.extend(f.fid("start_node"));
                    d.nodes.extend(f.fid("end_node"));
                }
            }
        }
        d
    }

    /// Every node and edge that exists or is still referenced by a
    /// generated row.
    pub fn everything(store: &Store) -> Dirty {
        let net = Network::load(store);
        let mut d = Dirty {
            nodes: net.nodes.keys().copied().collect(),
            edges: net.edges.keys().copied().collect(),
        };
        let mut collect = |layer: &str, column: &str, into_nodes: bool| {
            if let Ok(l) = store.layer(layer) {
                for f in l.features() {
                    if let Some(id) = f.fid(column) {
                        if into_nodes {
                            d.nodes.insert(id);
                        } else {
                            d.edges.insert(id);
                        }
                    }
                }
            }
        };
        for layer in [CORNER_RADIUS, INTERSECTION_LIMIT, INTERSECTION_SURFACE, INTERCONNECTION, INTERCONNECTION_OVERRIDE] {
            collect(layer, "node_id", true);
        }
        for layer in [SECTION_SURFACE, LANE, LANE_OVERRIDE, INTERSECTION_LIMIT] {
            collect(layer, "edge_id", false);
        }
        for layer in [STREET_OBJECT, PEDESTRIAN_CROSSING] {
            collect(layer, "ref_edge", false);
        }
        d
    }
}

struct Scope {
    nodes: BTreeSet<FeatureId>,
    edges: BTreeSet<FeatureId>,
}

impl Scope {
    fn new(net: &Network, dirty: &Dirty) -> Scope {
        let mut nodes = dirty.nodes.clone();
        for e in &dirty.edges {
            if let Some(edge) = net.edges.get(e) {
                nodes.insert(edge.start);
                nodes.insert(edge.end);
            }
        }
        let mut edges = dirty.edges.clone();
        for n in &nodes {
            edges.extend(net.incident(*n).iter().copied());
        }
        Scope { nodes, edges }
    }
}

/// How plan rows are matched with stored rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Matching {
    /// By a tuple of key columns; ids of regenerated rows are kept.
    Key(&'static [&'static str]),
    /// By feature id; plan rows carry the id of the row they replace.
    Id,
}

/// Desired content of one generated layer within the scope.
#[derive(Debug, Clone)]
pub struct LayerPlan {
    pub layer: &'static str,
    pub matching: Matching,
    pub existing: Vec<Feature>,
    pub desired: Vec<Feature>,
}

#[derive(Debug, Clone, Default)]
pub struct Plan {
    pub layers: Vec<LayerPlan>,
    pub warnings: Vec<String>,
}

const CORNER_KEYS: [&str; 3] = ["node_id", "edge_a", "edge_b"];
const LIMIT_KEYS: [&str; 2] = ["node_id", "edge_id"];
const NODE_KEY: [&str; 1] = ["node_id"];
const EDGE_KEY: [&str; 1] = ["edge_id"];

fn rows_in(store: &Store, layer: &str, column: &str, ids: &BTreeSet<FeatureId>) -> Vec<Feature> {
    store
        .layer(layer)
        .map(|l| {
            l.features()
                .filter(|f| f.fid(column).is_some_and(|id| ids.contains(&id)))
                .cloned()
                .collect()
        })
        .unwrap_or_default()
}

fn corner_rows(layout: &NodeLayout) -> Vec<Feature> {
    layout
        .corners
        .iter()
        .map(|c| {
            Feature::point(c.controller)
                .with("node_id", layout.node)
                .with("edge_a", c.edge_a)
                .with("edge_b", c.edge_b)
                .with("r", c.radius)
                .with("effective_r", c.effective_radius())
                .with("overridden", c.overridden)
                .with("clamped", c.clamped)
        })
        .collect()
}

fn limit_rows(layout: &NodeLayout) -> Vec<Feature> {
    layout
        .incidences
        .iter()
        .zip(&layout.limits)
        .filter_map(|(inc, l)| {
            let (p, _) = inc.outward.point_at(l.s, 0.0).ok()?;
            Some(
                Feature::point(p)
                    .with("node_id", layout.node)
                    .with("edge_id", l.edge)
                    .with("s", l.s)
                    .with("overridden", l.overridden),
            )
        })
        .collect()
}

/// Plans every generated row in the closure of `dirty`.
pub fn plan(store: &Store, dirty: &Dirty) -> Plan {
    let net = Network::load(store);
    let choices = UserChoices::load(store);
    let cfg = store.config();
    let scope = Scope::new(&net, dirty);
    let mut warnings = Vec::new();

    let mut layout_nodes = scope.nodes.clone();
    for e in &scope.edges {
        if let Some(edge) = net.edges.get(e) {
            layout_nodes.insert(edge.start);
            layout_nodes.insert(edge.end);
        }
    }
    let layouts: BTreeMap<FeatureId, NodeLayout> = layout_nodes
        .iter()
        .filter(|n| net.nodes.contains_key(n))
        .map(|n| (*n, layout_node(&net, *n, &choices, cfg)))
        .collect();
    let limit = |node: FeatureId, edge: FeatureId| {
        layouts
            .get(&node)
            .and_then(|l| l.limit(edge))
            .unwrap_or(DEAD_END_LIMIT)
    };
    let live_nodes: Vec<&NodeLayout> = scope.nodes.iter().filter_map(|n| layouts.get(n)).collect();

    let mut corners = Vec::new();
    let mut limits = Vec::new();
    let mut isurfaces = Vec::new();
    for layout in &live_nodes {
        corners.extend(corner_rows(layout));
        limits.extend(limit_rows(layout));
        for c in layout.corners.iter().filter(|c| c.clamped) {
            warnings.push(format!(
                "corner radius {} at node {} between edges {} and {} reduced to fit",
                c.radius, layout.node, c.edge_a, c.edge_b
            ));
        }
        if layout.incidences.len() >= 2 {
            match layout.surface() {
                Some(poly) => isurfaces.push(Feature::polygon(poly).with("node_id", layout.node)),
                None => warnings.push(format!("intersection surface of node {} is degenerate", layout.node)),
            }
        }
    }

    let mut sections = Vec::new();
    let mut lanes = Vec::new();
    let mut planned_lanes: BTreeMap<FeatureId, Vec<Feature>> = BTreeMap::new();
    for eid in &scope.edges {
        let Some(edge) = net.edges.get(eid) else { continue };
        let (s0, s1) = (limit(edge.start, edge.id), limit(edge.end, edge.id));
        let poly = section_polygon(&edge.axis, edge.width, s0, s1);
        if poly.is_none() {
            warnings.push(format!("section of road axis {} is degenerate", edge.id));
        }
        let degenerate = poly.is_none();
        let mut row = Feature::new(poly.map(Geometry::Polygon));
        row.set("edge_id", edge.id);
        row.set("degenerate", degenerate);
        sections.push(row);
        let auto = auto_lanes(edge, s0, s1, cfg);
        planned_lanes.insert(edge.id, auto.clone());
        lanes.extend(auto);
    }

    let existing_lane_overrides = rows_in(store, LANE_OVERRIDE, "edge_id", &scope.edges);
    let kept_lane_overrides: Vec<Feature> = existing_lane_overrides
        .iter()
        .filter(|o| {
            let (Some(e), Some(i)) = (o.fid("edge_id"), o.int("lane_index")) else {
                return false;
            };
            net.edges.get(&e).is_some_and(|edge| i >= 0 && i < edge.lane_count)
        })
        .cloned()
        .collect();

    // Replanned lanes move at both ends, so interconnections are rebuilt
    // at every node touching a scope edge.
    let ic_nodes: BTreeSet<FeatureId> = layouts.keys().copied().collect();
    let binding = lane_binding();
    let keys: Vec<String> = LANE_KEYS.iter().map(|k| k.to_string()).collect();
    let over_index: BTreeMap<Vec<String>, &Feature> = kept_lane_overrides
        .iter()
        .map(|o| (override_key(o, &keys), o))
        .collect();
    let around: BTreeSet<FeatureId> = layouts
        .values()
        .flat_map(|l| l.incidences.iter().map(|i| i.edge))
        .collect();
    let outside: BTreeSet<FeatureId> = around.iter().filter(|e| !planned_lanes.contains_key(e)).copied().collect();
    let mut merged_lanes = stored_merged_lanes(store, &outside);
    for e in around.iter().filter(|e| planned_lanes.contains_key(e)) {
        let rows = planned_lanes[e]
            .iter()
            .map(|row| merge_row(&binding, row, over_index.get(&override_key(row, &keys)).copied()))
            .collect();
        merged_lanes.insert(*e, rows);
    }

    let mut interconnections = Vec::new();
    for node in &ic_nodes {
        interconnections.extend(node_interconnections(&net, *node, &merged_lanes));
    }
    let ic_keys: Vec<String> = INTERCONNECTION_KEYS.iter().map(|k| k.to_string()).collect();
    let auto_ic: BTreeMap<Vec<String>, &Feature> = interconnections
        .iter()
        .map(|f| (override_key(f, &ic_keys), f))
        .collect();
    let existing_ic_overrides = rows_in(store, INTERCONNECTION_OVERRIDE, "node_id", &ic_nodes);
    let ic_overrides: Vec<Feature> = existing_ic_overrides
        .iter()
        .filter_map(|o| auto_ic.get(&override_key(o, &ic_keys)).map(|a| reanchor(o, a)))
        .collect();

    let existing_objects = rows_in(store, STREET_OBJECT, "ref_edge", &scope.edges);
    let objects: Vec<Feature> = existing_objects.iter().map(|f| resync_object(f, &net)).collect();

    let existing_crossings = rows_in(store, PEDESTRIAN_CROSSING, "ref_edge", &scope.edges);
    let crossings: Vec<Feature> = existing_crossings
        .iter()
        .filter_map(|f| {
            let c = crossing_of(f)?;
            let edge = net.edges.get(&c.edge)?;
            let row = crossing_row(edge, &c);
            if row.is_none() {
                warnings.push(format!("pedestrian crossing {} cannot be rebuilt", f.id));
            }
            row.map(|r| r.with_id(f.id))
        })
        .collect();

    let keyed = |layer: &'static str, keys: &'static [&'static str], column: &str, ids: &BTreeSet<FeatureId>, desired: Vec<Feature>| {
        LayerPlan {
            layer,
            matching: Matching::Key(keys),
            existing: rows_in(store, layer, column, ids),
            desired,
        }
    };
    let layers = vec![
        keyed(CORNER_RADIUS, &CORNER_KEYS, "node_id", &scope.nodes, corners),
        keyed(INTERSECTION_LIMIT, &LIMIT_KEYS, "node_id", &scope.nodes, limits),
        keyed(SECTION_SURFACE, &EDGE_KEY, "edge_id", &scope.edges, sections),
        keyed(INTERSECTION_SURFACE, &NODE_KEY, "node_id", &scope.nodes, isurfaces),
        keyed(LANE, &LANE_KEYS, "edge_id", &scope.edges, lanes),
        LayerPlan {
            layer: LANE_OVERRIDE,
            matching: Matching::Id,
            existing: existing_lane_overrides,
            desired: kept_lane_overrides,
        },
        keyed(INTERCONNECTION, &INTERCONNECTION_KEYS, "node_id", &ic_nodes, interconnections),
        LayerPlan {
            layer: INTERCONNECTION_OVERRIDE,
            matching: Matching::Id,
            existing: existing_ic_overrides,
            desired: ic_overrides,
        },
        LayerPlan {
            layer: STREET_OBJECT,
            matching: Matching::Id,
            existing: existing_objects,
            desired: objects,
        },
        LayerPlan {
            layer: PEDESTRIAN_CROSSING,
            matching: Matching::Id,
            existing: existing_crossings,
            desired: crossings,
        },
    ];
    Plan { layers, warnings }
}

fn key_strings(keys: &[&str]) -> Vec<String> {
    keys.iter().map(|k| k.to_string()).collect()
}

/// Pairs desired rows with stored ones. Returns (stored, desired) pairs
/// where either side may be missing.
fn pair_up(plan: &LayerPlan) -> Vec<(Option<&Feature>, Option<&Feature>)> {
    let mut out = Vec::new();
    match plan.matching {
        Matching::Key(keys) => {
            let keys = key_strings(keys);
            let mut stored: BTreeMap<Vec<String>, Vec<&Feature>> = BTreeMap::new();
            for f in &plan.existing {
                stored.entry(override_key(f, &keys)).or_default().push(f);
            }
            for d in &plan.desired {
                let ex = stored.get_mut(&override_key(d, &keys)).and_then(|v| {
                    if v.is_empty() {
                        None
                    } else {
                        Some(v.remove(0))
                    }
                });
                out.push((ex, Some(d)));
            }
            for rest in stored.into_values().flatten() {
                out.push((Some(rest), None));
            }
        }
        Matching::Id => {
            let desired: BTreeMap<FeatureId, &Feature> = plan.desired.iter().map(|f| (f.id, f)).collect();
            for f in &plan.existing {
                out.push((Some(f), desired.get(&f.id).copied()));
            }
        }
    }
    out
}

/// Writes a plan: unchanged rows are left alone.
pub fn apply_plan(tx: &mut Tx<'_>, plan: Plan) -> Result<()> {
    for w in plan.warnings {
        tx.warn(w);
    }
    for lp in &plan.layers {
        for (stored, desired) in pair_up(lp) {
            match (stored, desired) {
                (Some(s), Some(d)) => {
                    tx.update_if_changed(lp.layer, d.clone().with_id(s.id))?;
                }
                (None, Some(d)) => {
                    tx.insert(lp.layer, d.clone().with_id(0))?;
                }
                (Some(s), None) => tx.delete(lp.layer, s.id)?,
                (None, None) => {}
            }
        }
    }
    Ok(())
}

/// Regenerates the closure of `dirty` inside the current change set.
pub fn regenerate(tx: &mut Tx<'_>, dirty: &Dirty) -> Result<()> {
    if dirty.is_empty() {
        return Ok(());
    }
    let p = plan(tx.store(), dirty);
    apply_plan(tx, p)
}

/// Differences between the stored model and a full re-plan.
pub fn plan_mismatches(store: &Store) -> Vec<String> {
    let p = plan(store, &Dirty::everything(store));
    let mut out = Vec::new();
    for lp in &p.layers {
        let schema = store.layer(lp.layer).map(|l| l.schema().clone()).ok();
        for (stored, desired) in pair_up(lp) {
            match (stored, desired) {
                (Some(s), Some(d)) => {
                    let d = schema
                        .as_ref()
                        .and_then(|sc| sc.normalize(d.clone()).ok())
                        .unwrap_or_else(|| d.clone());
                    if !s.approx_eq(&d, CHECK_TOLERANCE) {
                        out.push(format!("{}#{} differs from its regenerated value", lp.layer, s.id));
                    }
                }
                (None, Some(d)) => out.push(format!(
                    "{} is missing a row for {}",
                    lp.layer,
                    describe(d, lp.matching)
                )),
                (Some(s), None) => out.push(format!("{}#{} should not exist", lp.layer, s.id)),
                (None, None) => {}
            }
        }
    }
    out
}

fn describe(f: &Feature, matching: Matching) -> String {
    match matching {
        Matching::Key(keys) => keys
            .iter()
            .map(|k| format!("{k}={}", f.get(k)))
            .collect::<Vec<_>>()
            .join(", "),
        Matching::Id => format!("id {}", f.id),
    }
}

/// Deferred trigger body for node and axis changes.
pub fn on_network_change(tx: &mut Tx<'_>, records: &[ChangeRecord]) -> Result<()> {
    let dirty = Dirty::from_records(records);
    regenerate(tx, &dirty)
}
