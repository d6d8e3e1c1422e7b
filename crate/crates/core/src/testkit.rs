//! Random user edits for fuzzing the street model.

use rand::seq::IndexedRandom;
use rand::Rng;
use streetbase_geom::{Point, Polygon, Vec2};

use crate::model::names::*;
use crate::model::traffic::{BACKWARD, FORWARD};
use crate::store::{ChangeRecord, ChangeSet, Feature, Geometry, Origin, Store};

pub const FUZZ_USER: &str = "fuzzer";

/// Kinds of edit produced by [`random_edit`].
pub const EDIT_KINDS: [&str; 14] = [
    "move node",
    "width",
    "lane count",
    "drag limit",
    "radius",
    "insert object",
    "move object",
    "delete edge",
    "insert edge",
    "insert node",
    "flip lane",
    "toggle interconnection",
    "probe width",
    "insert crossing",
];

fn rows(store: &Store, layer: &str) -> Vec<Feature> {
    store.read(layer).unwrap_or_default()
}

fn jitter(rng: &mut impl Rng, p: Point, r: f64) -> Point {
    Point::new(p.x + rng.random_range(-r..r), p.y + rng.random_range(-r..r))
}

fn on_some_axis(store: &Store, rng: &mut impl Rng) -> Option<(Feature, Point, f64)> {
    let axes = rows(store, ROAD_AXIS);
    let a = axes.choose(rng)?.clone();
    let line = a.polyline_geometry()?.clone();
    let s = rng.random_range(0.0..line.length());
    let d = rng.random_range(-8.0..8.0);
    let (p, tangent) = line.point_at(s, d).ok()?;
    Some((a, p, tangent))
}

fn user(rec: ChangeRecord) -> ChangeSet {
    ChangeSet::new(Origin::user(FUZZ_USER)).with(rec)
}

fn update(layer: &str, f: Feature) -> ChangeSet {
    user(ChangeRecord::update(layer, f.id, f))
}

/// One random user edit against the current state, with its kind. Edits
/// may be refused by the engine; a refusal must leave the store untouched.
pub fn random_edit(store: &Store, rng: &mut impl Rng) -> Option<(&'static str, ChangeSet)> {
    for _ in 0..8 {
        let kind = *EDIT_KINDS.choose(rng)?;
        if let Some(cs) = build(store, rng, kind) {
            return Some((kind, cs));
        }
    }
    None
}

pub fn build(store: &Store, rng: &mut impl Rng, kind: &str) -> Option<ChangeSet> {
    match kind {
        "move node" => {
            let mut n = rows(store, ROAD_NODE).choose(rng)?.clone();
            let p = jitter(rng, *n.point_geometry()?, 6.0);
            n.geometry = Some(Geometry::Point(p));
            Some(update(EDIT_NODE, n))
        }
        "width" => {
            let a = rows(store, ROAD_AXIS).choose(rng)?.clone();
            Some(update(EDIT_EDGE, a.with("width", rng.random_range(3.0..14.0))))
        }
        "lane count" => {
            let a = rows(store, ROAD_AXIS).choose(rng)?.clone();
            Some(update(EDIT_EDGE, a.with("lane_count", rng.random_range(1..=4i64))))
        }
        "drag limit" => {
            let mut l = rows(store, INTERSECTION_LIMIT).choose(rng)?.clone();
            let p = jitter(rng, *l.point_geometry()?, 10.0);
            l.geometry = Some(Geometry::Point(p));
            Some(update(CTL_INTERSECTION_LIMIT, l))
        }
        "radius" => {
            let c = rows(store, CORNER_RADIUS).choose(rng)?.clone();
            if rng.random_bool(0.2) {
                return Some(user(ChangeRecord::delete(CTL_CORNER_RADIUS, c.id)));
            }
            Some(update(CTL_CORNER_RADIUS, c.with("r", rng.random_range(0.5..15.0))))
        }
        "insert object" => {
            let (_, p, _) = on_some_axis(store, rng)?;
            let mode = *["axis", "sidewalk", "absolute"].choose(rng)?;
            let orientation = *["absolute", "relative"].choose(rng)?;
            let f = Feature::point(p)
                .with("class", "post")
                .with("position_mode", mode)
                .with("orientation_mode", orientation)
                .with("theta_abs", rng.random_range(-3.0..3.0));
            Some(user(ChangeRecord::insert(EDIT_OBJECT, f)))
        }
        "move object" => {
            let mut o = rows(store, STREET_OBJECT).choose(rng)?.clone();
            let p = jitter(rng, *o.point_geometry()?, 15.0);
            o.geometry = Some(Geometry::Point(p));
            Some(update(EDIT_OBJECT, o))
        }
        "delete edge" => {
            let a = rows(store, ROAD_AXIS);
            if a.len() < 4 {
                return None;
            }
            Some(user(ChangeRecord::delete(EDIT_EDGE, a.choose(rng)?.id)))
        }
        "insert edge" => {
            let nodes = rows(store, ROAD_NODE);
            let a = *nodes.choose(rng)?.point_geometry()?;
            let b = *nodes.choose(rng)?.point_geometry()?;
            if a.distance(&b) > 150.0 || a.distance(&b) < 1.0 {
                return None;
            }
            let mid = jitter(rng, a.lerp(&b, 0.5), 5.0);
            let line = streetbase_geom::Polyline::new(vec![a, mid, b]).ok()?;
            Some(user(ChangeRecord::insert(EDIT_EDGE, Feature::polyline(line))))
        }
        "insert node" => {
            let (_, p, _) = on_some_axis(store, rng)?;
            let q = if rng.random_bool(0.5) { p } else { jitter(rng, p, 30.0) };
            Some(user(ChangeRecord::insert(EDIT_NODE, Feature::point(q))))
        }
        "flip lane" => {
            let l = rows(store, LANE_MERGED).choose(rng)?.clone();
            if rng.random_bool(0.3) {
                return Some(user(ChangeRecord::delete(EDIT_LANE, l.id)));
            }
            let dir = if l.text("direction") == Some(FORWARD) { BACKWARD } else { FORWARD };
            Some(update(EDIT_LANE, l.with("direction", dir)))
        }
        "toggle interconnection" => {
            let i = rows(store, INTERCONNECTION_MERGED).choose(rng)?.clone();
            Some(user(ChangeRecord::delete(EDIT_INTERCONNECTION, i.id)))
        }
        "probe width" => {
            let (a, _, _) = on_some_axis(store, rng)?;
            let line = a.polyline_geometry()?;
            let half = rng.random_range(2.0..6.0);
            let mut cs = ChangeSet::new(Origin::user(FUZZ_USER));
            for _ in 0..rng.random_range(1..5) {
                let s = rng.random_range(0.3..0.7) * line.length();
                let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let (p, _) = line.point_at(s, side * half).ok()?;
                cs.push(ChangeRecord::insert(CTL_WIDTH_PROBE, Feature::point(p)));
            }
            Some(cs)
        }
        "insert crossing" => {
            let (a, _, tangent) = on_some_axis(store, rng)?;
            let line = a.polyline_geometry()?;
            let (c, _) = line.point_at(line.length() / 2.0, 0.0).ok()?;
            let w = a.real("width")?;
            let u = Vec2::from_angle(tangent + std::f64::consts::FRAC_PI_2 + rng.random_range(-0.4..0.4));
            let n = u.left_normal();
            let (hl, hw) = (w / 2.0 + 0.5, rng.random_range(1.0..3.0));
            let ring = vec![c - u * hl - n * hw, c + u * hl - n * hw, c + u * hl + n * hw, c - u * hl + n * hw];
            Some(user(ChangeRecord::insert(EDIT_PEDESTRIAN_CROSSING, Feature::polygon(Polygon::from_open_ring(ring).ok()?))))
        }
        _ => None,
    }
}
