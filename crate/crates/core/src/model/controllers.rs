//! Geometric controllers of the road model: intersection limits, corner
//! radii and width probes.

use std::collections::BTreeMap;

use streetbase_geom::Point;

use super::layout::{border, DEAD_END_LIMIT, MAX_LIMIT_FRACTION};
use super::names::*;
use super::network::Network;
use super::objects::sections;
use super::regen::{regenerate, Dirty};
use crate::error::EngineError;
use crate::store::{ChangeRecord, Feature, FeatureId, Geometry};
use crate::trigger::{Result, Tx};

fn moved_point(old: &Feature, new: &Feature) -> Option<Point> {
    match (new.point_geometry(), old.point_geometry()) {
        (Some(p), Some(q)) if p.same_xy(q) => None,
        (Some(p), _) => Some(*p),
        _ => None,
    }
}

fn changed_real(old: &Feature, new: &Feature, key: &str) -> Option<f64> {
    new.real(key).filter(|v| Some(*v) != old.real(key))
}

/// Dragging a limit controller: only its projection on the axis counts.
pub fn limit_update(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let old = rec.old.as_ref().expect("view updates carry the current row");
    let new = rec.new.as_ref().expect("view updates carry a payload");
    let (Some(node), Some(edge_id)) = (old.fid("node_id"), old.fid("edge_id")) else {
        return Err(EngineError::invalid(CTL_INTERSECTION_LIMIT, "limit row without node or edge"));
    };
    let net = Network::load(tx.store());
    let edge = net
        .edges
        .get(&edge_id)
        .ok_or_else(|| EngineError::NotFound(format!("road axis {edge_id}")))?;
    let outward = edge.outward(node);
    let requested = match moved_point(old, new) {
        Some(p) => outward.project(&p).s,
        None => match changed_real(old, new, "s") {
            Some(s) => s,
            None => return Ok(Some(old.id)),
        },
    };
    if !requested.is_finite() {
        return Err(EngineError::invalid(CTL_INTERSECTION_LIMIT, "s must be finite"));
    }
    let cap = MAX_LIMIT_FRACTION * outward.length();
    let s = if requested > cap {
        tx.warn(format!(
            "limit of road axis {edge_id} at node {node} clamped to {cap:.3} m ({}% of its length)",
            MAX_LIMIT_FRACTION * 100.0
        ));
        cap
    } else {
        requested.max(DEAD_END_LIMIT)
    };
    let (p, _) = outward.point_at(s, 0.0)?;
    let mut row = old.clone();
    row.geometry = Some(Geometry::Point(p));
    row.set("s", s);
    row.set("overridden", true);
    tx.update_if_changed(INTERSECTION_LIMIT, row)?;
    regenerate(tx, &Dirty::nodes([node]))?;
    Ok(Some(old.id))
}

/// Deleting a limit controller returns the limit to its default.
pub fn limit_reset(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let old = rec.old.as_ref().expect("view deletes carry the current row");
    let mut row = old.clone();
    row.set("overridden", false);
    tx.update_if_changed(INTERSECTION_LIMIT, row)?;
    if let Some(node) = old.fid("node_id") {
        regenerate(tx, &Dirty::nodes([node]))?;
    }
    Ok(Some(old.id))
}

/// Radius implied by a controller point: its distance to the nearer of the
/// two borders meeting at the corner.
pub fn radius_from_point(net: &Network, node: FeatureId, edge_a: FeatureId, edge_b: FeatureId, p: &Point) -> Result<f64> {
    let a = net
        .edges
        .get(&edge_a)
        .ok_or_else(|| EngineError::NotFound(format!("road axis {edge_a}")))?;
    let b = net
        .edges
        .get(&edge_b)
        .ok_or_else(|| EngineError::NotFound(format!("road axis {edge_b}")))?;
    let left_a = border(&a.outward(node), a.width / 2.0);
    let right_b = border(&b.outward(node), -b.width / 2.0);
    Ok(left_a.distance_to(p).min(right_b.distance_to(p)))
}

/// Dragging a radius controller sets the radius to the smallest distance
/// between the controller and the two road borders.
pub fn radius_update(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let old = rec.old.as_ref().expect("view updates carry the current row");
    let new = rec.new.as_ref().expect("view updates carry a payload");
    let (Some(node), Some(ea), Some(eb)) = (old.fid("node_id"), old.fid("edge_a"), old.fid("edge_b")) else {
        return Err(EngineError::invalid(CTL_CORNER_RADIUS, "radius row without node or edges"));
    };
    let r = match moved_point(old, new) {
        Some(p) => {
            for (edge, poly) in sections(tx.store()) {
                if (edge == ea || edge == eb) && poly.contains_point(&p) {
                    return Err(EngineError::rejected(
                        CTL_CORNER_RADIUS,
                        format!("the radius controller is inside the road section of axis {edge}; drag it off the road"),
                    ));
                }
            }
            let net = Network::load(tx.store());
            radius_from_point(&net, node, ea, eb, &p)?
        }
        None => match changed_real(old, new, "r") {
            Some(r) => r,
            None => return Ok(Some(old.id)),
        },
    };
    if !(r > 0.0) || !r.is_finite() {
        return Err(EngineError::rejected(CTL_CORNER_RADIUS, "the corner radius must be positive"));
    }
    let mut row = old.clone();
    row.set("r", r);
    row.set("overridden", true);
    tx.update_if_changed(CORNER_RADIUS, row)?;
    regenerate(tx, &Dirty::nodes([node]))?;
    Ok(Some(old.id))
}

/// Deleting a radius controller returns the corner to the default radius.
pub fn radius_reset(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let old = rec.old.as_ref().expect("view deletes carry the current row");
    let mut row = old.clone();
    row.set("r", tx.config().default_radius_m);
    row.set("overridden", false);
    tx.update_if_changed(CORNER_RADIUS, row)?;
    if let Some(node) = old.fid("node_id") {
        regenerate(tx, &Dirty::nodes([node]))?;
    }
    Ok(Some(old.id))
}

/// A probe click lands in the probe layer; interpretation waits for the
/// end of the change set so that several probes count together.
pub fn probe_insert(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let input = rec.new.as_ref().expect("view inserts carry a payload");
    let p = *input
        .point_geometry()
        .ok_or_else(|| EngineError::invalid(CTL_WIDTH_PROBE, "a width probe is a point"))?;
    Ok(Some(tx.insert(WIDTH_PROBE, Feature::point(p))?))
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Edge a probe measures: the section containing it, else the nearest
/// section within twice its road width.
pub fn probe_edge(net: &Network, sections: &[(FeatureId, streetbase_geom::Polygon)], p: &Point) -> Option<FeatureId> {
    if let Some((e, _)) = sections.iter().find(|(e, poly)| net.edges.contains_key(e) && poly.contains_point(p)) {
        return Some(*e);
    }
    let mut best: Option<(FeatureId, f64)> = None;
    for (e, poly) in sections {
        let Some(edge) = net.edges.get(e) else { continue };
        let d = poly.boundary_distance(p);
        if d <= 2.0 * edge.width && best.is_none_or(|(_, b)| d < b) {
            best = Some((*e, d));
        }
    }
    best.map(|(e, _)| e)
}

/// Consumes the probes of a change set: per edge, the new width is twice
/// the median distance from the probes to the axis.
pub fn interpret_probes(tx: &mut Tx<'_>, records: &[ChangeRecord]) -> Result<()> {
    let probes: Vec<Feature> = records
        .iter()
        .filter_map(|r| r.id)
        .filter_map(|id| tx.get(WIDTH_PROBE, id).cloned())
        .collect();
    if probes.is_empty() {
        return Ok(());
    }
    let net = Network::load(tx.store());
    let secs = sections(tx.store());
    let mut per_edge: BTreeMap<FeatureId, Vec<f64>> = BTreeMap::new();
    for probe in &probes {
        let Some(p) = probe.point_geometry() else { continue };
        match probe_edge(&net, &secs, p) {
            Some(e) => per_edge.entry(e).or_default().push(net.edges[&e].axis.distance_to(p)),
            None => tx.warn(format!(
                "width probe at ({:.3}, {:.3}) is not near any road section and was ignored",
                p.x, p.y
            )),
        }
    }
    for (e, mut distances) in per_edge {
        let Some(m) = median(&mut distances) else { continue };
        let width = 2.0 * m;
        if !(width > 0.0) {
            tx.warn(format!("width probes of road axis {e} lie on the axis and were ignored"));
            continue;
        }
        if let Some(mut axis) = tx.get(ROAD_AXIS, e).cloned() {
            axis.set("width", width);
            tx.update_if_changed(ROAD_AXIS, axis)?;
        }
    }
    for probe in probes {
        tx.delete(WIDTH_PROBE, probe.id)?;
    }
    Ok(())
}
