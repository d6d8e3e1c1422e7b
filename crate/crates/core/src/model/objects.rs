//! Street objects with dual positioning, and pedestrian crossings.

use std::f64::consts::PI;

use streetbase_geom::{
    angle_mod_pi, normalize_angle, polygon_intersection_area, weighted_orientation_mean, Point, Polygon, Projection,
    Vec2,
};

use super::names::*;
use super::network::{Edge, Network};
use crate::error::EngineError;
use crate::store::{ChangeRecord, Feature, FeatureId, Geometry, Store, Value};
use crate::trigger::{Result, Tx};

pub const ABSOLUTE: &str = "absolute";
pub const AXIS: &str = "axis";
pub const SIDEWALK: &str = "sidewalk";
pub const RELATIVE: &str = "relative";

/// Smallest crossing angle used to size the canonical crossing.
const MIN_CROSSING_ANGLE: f64 = 10.0 * PI / 180.0;

/// Nearest axis to `p`; ties go to the smaller edge id.
pub fn nearest_edge<'a>(net: &'a Network, p: &Point) -> Option<(&'a Edge, Projection)> {
    let mut best: Option<(&Edge, Projection)> = None;
    for e in net.edges.values() {
        let proj = e.axis.project(p);
        if best.as_ref().is_none_or(|(_, b)| proj.distance < b.distance) {
            best = Some((e, proj));
        }
    }
    best
}

/// Offset from the axis for a relative position.
pub fn axis_offset(mode: &str, d: f64, side: i64, width: f64) -> f64 {
    if mode == SIDEWALK {
        side.signum() as f64 * (width / 2.0 + d)
    } else {
        d
    }
}

fn is_relative(mode: Option<&str>) -> bool {
    matches!(mode, Some(AXIS) | Some(SIDEWALK))
}

/// Clears every reference field, keeping position and orientation.
fn detach(f: &mut Feature) {
    f.set("position_mode", ABSOLUTE);
    f.set("orientation_mode", ABSOLUTE);
    for k in ["ref_edge", "s", "d", "side", "theta_rel"] {
        f.set(k, Value::Null);
    }
}

/// Attaches a relative object to the axis nearest its point.
pub fn attach(f: &mut Feature, net: &Network) -> Result<()> {
    let p = *f
        .point_geometry()
        .ok_or_else(|| EngineError::invalid(STREET_OBJECT, "an object needs a point"))?;
    let (edge, proj) = nearest_edge(net, &p)
        .ok_or_else(|| EngineError::Misconfigured("no road axis to position the object against".into()))?;
    let mode = f.text("position_mode").unwrap_or(AXIS).to_string();
    f.set("ref_edge", edge.id);
    f.set("s", proj.s);
    if mode == SIDEWALK {
        let side: i64 = if proj.d >= 0.0 { 1 } else { -1 };
        f.set("side", side);
        f.set("d", proj.d.abs() - edge.width / 2.0);
    } else {
        f.set("side", Value::Null);
        f.set("d", proj.d);
    }
    derive_relative_orientation(f, edge)?;
    place(f, edge);
    Ok(())
}

/// Fills a missing relative orientation from the absolute one.
fn derive_relative_orientation(f: &mut Feature, edge: &Edge) -> Result<()> {
    if f.text("orientation_mode") == Some(RELATIVE) && f.real("theta_rel").is_none() {
        let s = f.real("s").unwrap_or(0.0).clamp(0.0, edge.length());
        let tangent = edge.axis.tangent_at(s)?;
        let theta = f.real("theta_abs").unwrap_or(0.0);
        f.set("theta_rel", normalize_angle(theta - tangent));
    }
    Ok(())
}

/// Re-derives the absolute point and orientation from the stored relative
/// parameters, clamping `s` onto the axis.
fn place(f: &mut Feature, edge: &Edge) {
    let len = edge.length();
    let s = f.real("s").unwrap_or(0.0);
    let clamped_s = s.clamp(0.0, len);
    if clamped_s != s {
        f.set("s", clamped_s);
        f.set("clamped", true);
    }
    let mode = f.text("position_mode").unwrap_or(AXIS).to_string();
    let d = axis_offset(
        &mode,
        f.real("d").unwrap_or(0.0),
        f.int("side").unwrap_or(1),
        edge.width,
    );
    if let Ok((p, tangent)) = edge.axis.point_at(clamped_s, d) {
        f.geometry = Some(Geometry::Point(p));
        if f.text("orientation_mode") == Some(RELATIVE) {
            let rel = f.real("theta_rel").unwrap_or(0.0);
            f.set("theta_abs", normalize_angle(tangent + rel));
        }
    }
}

/// The object as regeneration wants it: re-placed against its reference
/// axis, or switched to absolute positioning when that axis is gone.
pub fn resync_object(f: &Feature, net: &Network) -> Feature {
    let mut out = f.clone();
    if !is_relative(f.text("position_mode")) {
        return out;
    }
    match f.fid("ref_edge").and_then(|e| net.edges.get(&e)) {
        Some(edge) => place(&mut out, edge),
        None => detach(&mut out),
    }
    out
}

fn object_row(input: &Feature) -> Result<Feature> {
    let p = *input
        .point_geometry()
        .ok_or_else(|| EngineError::invalid(EDIT_OBJECT, "an object needs a point"))?;
    let mode = input.text("position_mode").unwrap_or(AXIS);
    if ![ABSOLUTE, AXIS, SIDEWALK].contains(&mode) {
        return Err(EngineError::invalid(
            EDIT_OBJECT,
            format!("position_mode must be {ABSOLUTE}, {AXIS} or {SIDEWALK}"),
        ));
    }
    let default_orientation = if mode == ABSOLUTE { ABSOLUTE } else { RELATIVE };
    let orientation = input.text("orientation_mode").unwrap_or(default_orientation);
    if ![ABSOLUTE, RELATIVE].contains(&orientation) {
        return Err(EngineError::invalid(
            EDIT_OBJECT,
            format!("orientation_mode must be {ABSOLUTE} or {RELATIVE}"),
        ));
    }
    Ok(Feature::point(p)
        .with("class", input.text("class").unwrap_or("object"))
        .with("position_mode", mode)
        .with("ref_edge", Value::Null)
        .with("s", Value::Null)
        .with("d", Value::Null)
        .with("side", Value::Null)
        .with("orientation_mode", orientation)
        .with("theta_abs", input.real("theta_abs").unwrap_or(0.0))
        .with("theta_rel", Value::Null)
        .with("clamped", false))
}

pub fn edit_object_insert(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let input = rec.new.as_ref().expect("view inserts carry a payload");
    let mut row = object_row(input)?;
    if is_relative(row.text("position_mode")) {
        let net = Network::load(tx.store());
        attach(&mut row, &net)?;
    } else {
        row.set("orientation_mode", ABSOLUTE);
    }
    Ok(Some(tx.insert(STREET_OBJECT, row)?))
}

fn changed(old: &Feature, new: &Feature, key: &str) -> bool {
    let v = new.get(key);
    !v.is_null() && v != old.get(key)
}

/// A user move re-attaches to the nearest axis; edits of the relative
/// parameters move the point instead.
pub fn edit_object_update(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let old = rec.old.as_ref().expect("view updates carry the current row");
    let new = rec.new.as_ref().expect("view updates carry a payload");
    let mut merged = old.clone();
    if new.geometry.is_some() {
        merged.geometry = new.geometry.clone();
    }
    for (k, v) in &new.attributes {
        if !v.is_null() {
            merged.attributes.insert(k.clone(), v.clone());
        }
    }
    let mut row = object_row(&merged)?;
    row.id = old.id;
    let moved = new.geometry.is_some() && new.geometry != old.geometry;
    let manual = !moved
        && !changed(old, new, "position_mode")
        && ["ref_edge", "s", "d", "side"].iter().any(|k| changed(old, new, k));
    if is_relative(row.text("position_mode")) {
        let theta_rel = if changed(old, new, "theta_rel") {
            merged.get("theta_rel").clone()
        } else if changed(old, new, "theta_abs") {
            Value::Null
        } else {
            old.get("theta_rel").clone()
        };
        if row.text("orientation_mode") == Some(RELATIVE) {
            row.set("theta_rel", theta_rel);
        }
        let net = Network::load(tx.store());
        if manual {
            let edge_id = merged
                .fid("ref_edge")
                .ok_or_else(|| EngineError::invalid(EDIT_OBJECT, "ref_edge is required"))?;
            let edge = net
                .edges
                .get(&edge_id)
                .ok_or_else(|| EngineError::NotFound(format!("road axis {edge_id}")))?;
            for k in ["ref_edge", "s", "d", "side"] {
                row.set(k, merged.get(k).clone());
            }
            if row.real("s").is_none() || row.real("d").is_none() {
                return Err(EngineError::invalid(EDIT_OBJECT, "s and d are required"));
            }
            if row.text("position_mode") == Some(SIDEWALK) && row.int("side").is_none() {
                row.set("side", 1);
            }
            derive_relative_orientation(&mut row, edge)?;
            place(&mut row, edge);
        } else {
            attach(&mut row, &net)?;
        }
    } else {
        row.set("orientation_mode", ABSOLUTE);
    }
    // The clamp flag sticks until the user places the object again.
    if !moved && !manual && old.flag("clamped") == Some(true) {
        row.set("clamped", true);
    }
    tx.update_if_changed(STREET_OBJECT, row)?;
    Ok(Some(old.id))
}

pub fn edit_object_delete(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let id = rec.id.expect("view deletes carry an id");
    tx.delete(STREET_OBJECT, id)?;
    Ok(Some(id))
}

/// Parameters of a pedestrian crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub edge: FeatureId,
    /// Abscissa of the crossing centre line.
    pub s: f64,
    /// Extent of the stripe across its own direction.
    pub width: f64,
    /// Direction in which pedestrians cross, in `[0, π)`.
    pub orientation: f64,
}

/// Section surfaces with their edge ids.
pub fn sections(store: &Store) -> Vec<(FeatureId, Polygon)> {
    store
        .layer(SECTION_SURFACE)
        .map(|l| {
            l.features()
                .filter_map(|f| Some((f.fid("edge_id")?, f.polygon_geometry()?.clone())))
                .collect()
        })
        .unwrap_or_default()
}

/// Fits crossing parameters to a rough polygon drawn over a road.
///
/// The direction is the length-weighted vote of the boundary segments.
/// Segments are split by the side of the axis tangent their midpoint lies
/// on (both sides when it lies on the axis). A side's width is the extent
/// of its segment ends across the crossing direction; the width is the mean
/// over the sides present.
pub fn fit_crossing(net: &Network, sections: &[(FeatureId, Polygon)], poly: &Polygon) -> Result<Crossing> {
    let ring = poly.exterior_vertices();
    if ring.len() < 3 {
        return Err(EngineError::invalid(PEDESTRIAN_CROSSING, "a crossing needs at least 3 points"));
    }
    let mut best: Option<(FeatureId, f64)> = None;
    for (edge, section) in sections {
        let a = polygon_intersection_area(poly, section);
        if a > 0.0 && best.is_none_or(|(_, b)| a > b) && net.edges.contains_key(edge) {
            best = Some((*edge, a));
        }
    }
    let centroid = poly.centroid();
    let edge = match best {
        Some((e, _)) => &net.edges[&e],
        None => match nearest_edge(net, &centroid) {
            Some((e, proj)) if proj.distance <= e.width => e,
            _ => return Err(EngineError::NotOnRoad("the crossing does not overlap any road section".into())),
        },
    };

    let n = ring.len();
    let mut angles = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let v = ring[(i + 1) % n] - ring[i];
        angles.push(v.angle());
        weights.push(v.norm());
    }
    let orientation = weighted_orientation_mean(&angles, &weights)?;

    let proj = edge.axis.project(&centroid);
    let (origin, tangent) = edge.axis.point_at(proj.s, 0.0)?;
    let along = Vec2::from_angle(tangent);
    let across = Vec2::from_angle(orientation).left_normal();
    let mut extents = [(f64::INFINITY, f64::NEG_INFINITY); 2];
    for i in 0..n {
        let (p, q) = (ring[i], ring[(i + 1) % n]);
        let side = along.cross(p.lerp(&q, 0.5) - origin);
        for (k, present) in [side >= 0.0, side <= 0.0].into_iter().enumerate() {
            if present {
                for t in [(p - origin).dot(across), (q - origin).dot(across)] {
                    extents[k] = (extents[k].0.min(t), extents[k].1.max(t));
                }
            }
        }
    }
    let widths: Vec<f64> = extents.iter().filter(|(lo, hi)| lo <= hi).map(|(lo, hi)| hi - lo).collect();
    if widths.is_empty() {
        return Err(EngineError::NotOnRoad("the crossing does not reach the axis".into()));
    }
    let width = widths.iter().sum::<f64>() / widths.len() as f64;
    if !(width > 0.0) {
        return Err(EngineError::invalid(PEDESTRIAN_CROSSING, "the crossing has no width"));
    }
    Ok(Crossing {
        edge: edge.id,
        s: proj.s,
        width,
        orientation,
    })
}

/// Rectangle spanning the road from border to border at `c.s`.
pub fn canonical_crossing(edge: &Edge, c: &Crossing) -> Option<Polygon> {
    let s = c.s.clamp(0.0, edge.length());
    let (center, tangent) = edge.axis.point_at(s, 0.0).ok()?;
    let u = Vec2::from_angle(c.orientation);
    let n = u.left_normal();
    let sin = (c.orientation - tangent).sin().abs().max(MIN_CROSSING_ANGLE.sin());
    let half_len = edge.width / 2.0 / sin;
    let half_w = c.width / 2.0;
    Polygon::from_open_ring(vec![
        center - u * half_len - n * half_w,
        center + u * half_len - n * half_w,
        center + u * half_len + n * half_w,
        center - u * half_len + n * half_w,
    ])
    .ok()
}

pub fn crossing_of(f: &Feature) -> Option<Crossing> {
    Some(Crossing {
        edge: f.fid("ref_edge")?,
        s: f.real("s")?,
        width: f.real("width")?,
        orientation: f.real("orientation")?,
    })
}

pub fn crossing_row(edge: &Edge, c: &Crossing) -> Option<Feature> {
    let s = c.s.clamp(0.0, edge.length());
    let c = Crossing { s, ..*c };
    let poly = canonical_crossing(edge, &c)?;
    Some(
        Feature::polygon(poly)
            .with("ref_edge", c.edge)
            .with("s", c.s)
            .with("width", c.width)
            .with("orientation", angle_mod_pi(c.orientation)),
    )
}

fn fitted_row(tx: &Tx<'_>, poly: &Polygon) -> Result<Feature> {
    let net = Network::load(tx.store());
    let c = fit_crossing(&net, &sections(tx.store()), poly)?;
    crossing_row(&net.edges[&c.edge], &c)
        .ok_or_else(|| EngineError::invalid(PEDESTRIAN_CROSSING, "cannot build the crossing polygon"))
}

pub fn edit_crossing_insert(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let input = rec.new.as_ref().expect("view inserts carry a payload");
    let poly = input
        .polygon_geometry()
        .ok_or_else(|| EngineError::invalid(EDIT_PEDESTRIAN_CROSSING, "a crossing is drawn as a polygon"))?;
    let row = fitted_row(tx, poly)?;
    Ok(Some(tx.insert(PEDESTRIAN_CROSSING, row)?))
}

/// Reshaping the polygon refits every parameter; editing the parameters
/// rebuilds the polygon.
pub fn edit_crossing_update(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let old = rec.old.as_ref().expect("view updates carry the current row");
    let new = rec.new.as_ref().expect("view updates carry a payload");
    let mut row = if new.geometry.is_some() && new.geometry != old.geometry {
        let poly = new
            .polygon_geometry()
            .ok_or_else(|| EngineError::invalid(EDIT_PEDESTRIAN_CROSSING, "a crossing is drawn as a polygon"))?;
        fitted_row(tx, poly)?
    } else {
        let mut merged = old.clone();
        for (k, v) in &new.attributes {
            if !v.is_null() {
                merged.attributes.insert(k.clone(), v.clone());
            }
        }
        let c = crossing_of(&merged)
            .ok_or_else(|| EngineError::invalid(EDIT_PEDESTRIAN_CROSSING, "ref_edge, s, width and orientation are required"))?;
        if !(c.width > 0.0) {
            return Err(EngineError::invalid(EDIT_PEDESTRIAN_CROSSING, "width must be positive"));
        }
        let net = Network::load(tx.store());
        let edge = net
            .edges
            .get(&c.edge)
            .ok_or_else(|| EngineError::NotFound(format!("road axis {}", c.edge)))?;
        crossing_row(edge, &c)
            .ok_or_else(|| EngineError::invalid(EDIT_PEDESTRIAN_CROSSING, "cannot build the crossing polygon"))?
    };
    row.id = old.id;
    tx.update_if_changed(PEDESTRIAN_CROSSING, row)?;
    Ok(Some(old.id))
}

pub fn edit_crossing_delete(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let id = rec.id.expect("view deletes carry an id");
    tx.delete(PEDESTRIAN_CROSSING, id)?;
    Ok(Some(id))
}
