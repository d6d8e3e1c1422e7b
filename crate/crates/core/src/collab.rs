//! Multi-user awareness: rounded screen extents, conflicts between them,
//! and a hexagonal todo grid over work areas.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use streetbase_geom::{polygon_intersection_area, polygon_intersection_centroid, GeomError, Point, Polygon, Rect};

use crate::error::EngineError;
use crate::store::{AttrType, ChangeKind, ChangeRecord, Feature, FeatureId, Geometry, GeometryKind, Schema, Store};
use crate::trigger::{Handler, Result, Timing, TriggerSpec, Tx};

pub const SCREEN_EXTENT: &str = "screen_extent";
pub const WORK_AREA: &str = "work_area";
pub const HEX_GRID: &str = "hex_grid";
pub const CONFLICTS: &str = "conflicts";

pub const TODO: &str = "todo";
pub const DONE: &str = "done";

const ARC_SEGMENTS: usize = 8;
const SQRT3: f64 = 1.732_050_807_568_877_2;

/// The rectangle with each corner replaced by a quarter arc of radius a
/// quarter of the short side.
pub fn round_extent(rect: &Rect) -> std::result::Result<Polygon, GeomError> {
    let (w, h) = (rect.width(), rect.height());
    if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
        return Err(GeomError::InvalidGeometry(format!("extent of size {w} x {h}")));
    }
    let r = 0.25 * w.min(h);
    let corners = [
        (rect.min_x + r, rect.min_y + r, PI),
        (rect.max_x - r, rect.min_y + r, 1.5 * PI),
        (rect.max_x - r, rect.max_y - r, 0.0),
        (rect.min_x + r, rect.max_y - r, 0.5 * PI),
    ];
    let mut ring = Vec::with_capacity(4 * (ARC_SEGMENTS + 1));
    for (cx, cy, start) in corners {
        for i in 0..=ARC_SEGMENTS {
            let a = start + 0.5 * PI * i as f64 / ARC_SEGMENTS as f64;
            let p = Point::new(cx + r * a.cos(), cy + r * a.sin());
            // Snap the tangent points so the sides stay exactly on the rectangle.
            let p = match i {
                0 | ARC_SEGMENTS => Point::new(
                    snap(p.x, &[rect.min_x, rect.max_x, cx]),
                    snap(p.y, &[rect.min_y, rect.max_y, cy]),
                ),
                _ => p,
            };
            ring.push(p);
        }
    }
    Polygon::from_open_ring(ring)
}

fn snap(v: f64, to: &[f64]) -> f64 {
    to.iter().copied().find(|t| (v - t).abs() < 1e-9 * (1.0 + t.abs())).unwrap_or(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extent {
    pub id: FeatureId,
    pub user: String,
    pub t: i64,
    pub polygon: Polygon,
}

impl Extent {
    pub fn from_feature(f: &Feature) -> Option<Extent> {
        Some(Extent {
            id: f.id,
            user: f.text("user_id")?.to_string(),
            t: f.int("t")?,
            polygon: f.polygon_geometry()?.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConflictKind {
    Revisit,
    Concurrent,
}

impl ConflictKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConflictKind::Revisit => "revisit",
            ConflictKind::Concurrent => "concurrent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conflict {
    pub kind: ConflictKind,
    /// The earlier extent of the pair, then the later one.
    pub first: FeatureId,
    pub second: FeatureId,
    pub users: (String, String),
    pub overlap_m2: f64,
    pub at: Point,
}

/// Same user back over an area after more than the window: revisit.
/// Two users over one area less than the window apart: concurrent.
pub fn detect_conflicts(extents: &[Extent], window_ms: i64) -> Vec<Conflict> {
    let mut sorted: Vec<&Extent> = extents.iter().collect();
    sorted.sort_by_key(|e| e.id);
    let boxes: Vec<Rect> = sorted.iter().map(|e| e.polygon.bbox()).collect();
    let mut out = Vec::new();
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            let (a, b) = (sorted[i], sorted[j]);
            let dt = (a.t - b.t).abs();
            let kind = if a.user == b.user && dt > window_ms {
                ConflictKind::Revisit
            } else if a.user != b.user && dt < window_ms {
                ConflictKind::Concurrent
            } else {
                continue;
            };
            if !boxes[i].intersects(&boxes[j]) {
                continue;
            }
            let area = polygon_intersection_area(&a.polygon, &b.polygon);
            if area <= 0.0 {
                continue;
            }
            let (first, second) = if (a.t, a.id) <= (b.t, b.id) { (a, b) } else { (b, a) };
            out.push(Conflict {
                kind,
                first: first.id,
                second: second.id,
                users: (first.user.clone(), second.user.clone()),
                overlap_m2: area,
                at: polygon_intersection_centroid(&a.polygon, &b.polygon).unwrap_or(first.polygon.centroid()),
            });
        }
    }
    out
}

fn conflicts(store: &Store) -> Vec<Feature> {
    let Ok(layer) = store.layer(SCREEN_EXTENT) else { return Vec::new() };
    let extents: Vec<Extent> = layer.features().filter_map(Extent::from_feature).collect();
    detect_conflicts(&extents, store.config().conflict_window_ms)
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let mut f = Feature::point(c.at)
                .with("kind", c.kind.as_str())
                .with("user_a", c.users.0)
                .with("user_b", c.users.1)
                .with("extent_a", c.first)
                .with("extent_b", c.second)
                .with("overlap_m2", c.overlap_m2);
            f.id = i as FeatureId + 1;
            f
        })
        .collect()
}

/// Axial coordinates of a flat-top hexagon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hex {
    pub q: i64,
    pub r: i64,
}

impl Hex {
    pub fn center(self, size: f64) -> Point {
        Point::new(1.5 * size * self.q as f64, SQRT3 * size * (self.r as f64 + 0.5 * self.q as f64))
    }

    pub fn polygon(self, size: f64) -> Polygon {
        let c = self.center(size);
        let ring = (0..6)
            .map(|k| {
                let a = PI / 3.0 * k as f64;
                Point::new(c.x + size * a.cos(), c.y + size * a.sin())
            })
            .collect();
        Polygon::from_open_ring(ring).expect("hexagon is valid")
    }

    /// The cell containing `p`.
    pub fn at(p: &Point, size: f64) -> Hex {
        let q = 2.0 / 3.0 * p.x / size;
        let r = (-p.x / 3.0 + SQRT3 / 3.0 * p.y) / size;
        let s = -q - r;
        let (mut rq, mut rr, rs) = (q.round(), r.round(), s.round());
        let (dq, dr, ds) = ((rq - q).abs(), (rr - r).abs(), (rs - s).abs());
        if dq > dr && dq > ds {
            rq = -rr - rs;
        } else if dr > ds {
            rr = -rq - rs;
        }
        Hex { q: rq as i64, r: rr as i64 }
    }
}

/// Every cell of the lattice whose hexagon overlaps `area` with positive area.
pub fn cover(area: &Polygon, size: f64) -> Vec<Hex> {
    let b = area.bbox();
    let q0 = ((b.min_x - size) / (1.5 * size)).floor() as i64;
    let q1 = ((b.max_x + size) / (1.5 * size)).ceil() as i64;
    let mut out = Vec::new();
    for q in q0..=q1 {
        let r0 = ((b.min_y - size) / (SQRT3 * size) - 0.5 * q as f64).floor() as i64;
        let r1 = ((b.max_y + size) / (SQRT3 * size) - 0.5 * q as f64).ceil() as i64;
        for r in r0..=r1 {
            let h = Hex { q, r };
            let poly = h.polygon(size);
            if poly.bbox().intersects(&b) && polygon_intersection_area(&poly, area) > 0.0 {
                out.push(h);
            }
        }
    }
    out
}

/// Full containment of a hexagon in a convex extent.
pub fn covers(extent: &Polygon, cell: &Polygon) -> bool {
    cell.exterior_vertices().iter().all(|v| extent.contains_point(v))
}

/// Time attributed to each extent: until the same user's next extent, at
/// most `cap_ms`.
pub fn extent_durations(extents: &[Extent], cap_ms: i64) -> BTreeMap<FeatureId, i64> {
    let mut by_user: BTreeMap<&str, Vec<&Extent>> = BTreeMap::new();
    for e in extents {
        by_user.entry(&e.user).or_default().push(e);
    }
    let mut out = BTreeMap::new();
    for list in by_user.values_mut() {
        list.sort_by_key(|e| (e.t, e.id));
        for (i, e) in list.iter().enumerate() {
            let d = list.get(i + 1).map_or(cap_ms, |n| (n.t - e.t).min(cap_ms));
            out.insert(e.id, d);
        }
    }
    out
}

/// Edit time accrued by each cell: the sum of the durations of all
/// extents overlapping it.
pub fn aggregate_edit_time(extents: &[Extent], cells: &[Polygon], cap_ms: i64) -> Vec<i64> {
    let durations = extent_durations(extents, cap_ms);
    let boxes: Vec<Rect> = extents.iter().map(|e| e.polygon.bbox()).collect();
    cells
        .iter()
        .map(|cell| {
            let cb = cell.bbox();
            extents
                .iter()
                .zip(&boxes)
                .filter(|(e, b)| b.intersects(&cb) && polygon_intersection_area(&e.polygon, cell) > 0.0)
                .map(|(e, _)| durations[&e.id])
                .sum()
        })
        .collect()
}

fn extents_in(store: &Store) -> Vec<Extent> {
    store
        .layer(SCREEN_EXTENT)
        .map(|l| l.features().filter_map(Extent::from_feature).collect())
        .unwrap_or_default()
}

fn round_and_check_extent(tx: &mut Tx<'_>, rec: &mut ChangeRecord) -> Result<()> {
    if rec.kind != ChangeKind::Insert {
        if tx.origin().is_user() {
            return Err(EngineError::Unsupported("screen extents are an append-only log".into()));
        }
        return Ok(());
    }
    let f = rec.new.as_mut().expect("inserts carry a payload");
    let Some(poly) = f.polygon_geometry() else {
        return Err(EngineError::invalid(SCREEN_EXTENT, "an extent needs a polygon"));
    };
    let rounded = round_extent(&poly.bbox())?;
    f.geometry = Some(Geometry::Polygon(rounded));
    let user = f
        .text("user_id")
        .ok_or_else(|| EngineError::invalid(SCREEN_EXTENT, "user_id is required"))?
        .to_string();
    let t = f.int("t").ok_or_else(|| EngineError::invalid(SCREEN_EXTENT, "t is required"))?;
    if let Some(scale) = f.real("scale") {
        if !tx.config().scale_in_band(scale) {
            return Err(EngineError::rejected(SCREEN_EXTENT, format!("scale {scale} is outside the tracked band")));
        }
    }
    let last = tx
        .layer(SCREEN_EXTENT)?
        .features()
        .filter(|e| e.text("user_id") == Some(user.as_str()))
        .filter_map(|e| e.int("t"))
        .max();
    if let Some(last) = last.filter(|l| t <= *l) {
        return Err(EngineError::rejected(
            SCREEN_EXTENT,
            format!("extent of {user} at t={t} is not after its previous one at t={last}"),
        ));
    }
    Ok(())
}

fn cell_polygon(f: &Feature) -> Option<&Polygon> {
    f.polygon_geometry()
}

/// Flips covered cells to done and moves edit time: the new extent gets the
/// full cap, and the same user's previous extent is cut back to the gap.
fn record_extent_effects(tx: &mut Tx<'_>, rec: &mut ChangeRecord) -> Result<()> {
    let Some(new) = rec.new.as_ref().and_then(Extent::from_feature) else { return Ok(()) };
    let cap = tx.config().conflict_window_ms;
    let previous = extents_in(tx.store())
        .into_iter()
        .filter(|e| e.user == new.user && e.id != new.id && e.t < new.t)
        .max_by_key(|e| (e.t, e.id));
    let mut deltas: Vec<(Polygon, i64)> = vec![(new.polygon.clone(), cap)];
    if let Some(p) = previous {
        deltas.push((p.polygon, (new.t - p.t).min(cap) - cap));
    }
    let cells: Vec<Feature> = tx.layer(HEX_GRID)?.features().cloned().collect();
    for mut cell in cells {
        let Some(poly) = cell_polygon(&cell).cloned() else { continue };
        let poly = &poly;
        let mut changed = false;
        if cell.text("status") != Some(DONE) && covers(&new.polygon, poly) {
            cell.set("status", DONE);
            changed = true;
        }
        let cb = poly.bbox();
        let mut ms = cell.int("cumulated_ms").unwrap_or(0);
        for (p, d) in &deltas {
            if *d != 0 && p.bbox().intersects(&cb) && polygon_intersection_area(p, poly) > 0.0 {
                ms += d;
                changed = true;
            }
        }
        if changed {
            cell.set("cumulated_ms", ms);
            tx.update_if_changed(HEX_GRID, cell)?;
        }
    }
    Ok(())
}

fn area_size(tx: &Tx<'_>, f: &Feature) -> f64 {
    f.real("size").unwrap_or(tx.config().hex_size_m)
}

fn check_work_area(tx: &mut Tx<'_>, rec: &mut ChangeRecord) -> Result<()> {
    if let Some(f) = rec.new.as_ref() {
        let size = area_size(tx, f);
        if !(size.is_finite() && size > 0.0) {
            return Err(EngineError::rejected(WORK_AREA, format!("hexagon size must be positive, got {size}")));
        }
    }
    Ok(())
}

/// Rebuilds the cells of every touched work area. Done status survives
/// through the old cell containing each new centre.
fn regenerate_grids(tx: &mut Tx<'_>, recs: &[ChangeRecord]) -> Result<()> {
    let areas: BTreeSet<FeatureId> = recs.iter().filter_map(|r| r.id).collect();
    let cap = tx.config().conflict_window_ms;
    let extents = extents_in(tx.store());
    for area_id in areas {
        let old: Vec<Feature> = tx
            .layer(HEX_GRID)?
            .features()
            .filter(|c| c.fid("area_id") == Some(area_id))
            .cloned()
            .collect();
        let Some(area) = tx.get(WORK_AREA, area_id).cloned() else {
            for c in old {
                tx.delete(HEX_GRID, c.id)?;
            }
            continue;
        };
        let size = area_size(tx, &area);
        let Some(poly) = area.polygon_geometry() else { continue };
        let old_size = old.first().and_then(|c| c.real("size"));
        let mut old_by_hex: BTreeMap<Hex, Feature> = old
            .into_iter()
            .filter_map(|c| Some((Hex { q: c.int("q")?, r: c.int("r")? }, c)))
            .collect();
        let done_before: BTreeSet<Hex> = old_by_hex
            .iter()
            .filter(|(_, c)| c.text("status") == Some(DONE))
            .map(|(h, _)| *h)
            .collect();
        let hexes = cover(poly, size);
        let polys: Vec<Polygon> = hexes.iter().map(|h| h.polygon(size)).collect();
        let times = aggregate_edit_time(&extents, &polys, cap);
        let same_lattice = old_size == Some(size);
        for ((h, p), ms) in hexes.iter().zip(polys).zip(times) {
            let c = h.center(size);
            let was_done = match old_size {
                Some(s) if !done_before.is_empty() => done_before.contains(&Hex::at(&c, s)),
                _ => false,
            };
            let status = if was_done { DONE } else { TODO };
            let existing = if same_lattice { old_by_hex.remove(h) } else { None };
            let mut row = existing.unwrap_or_else(|| Feature::new(None));
            row.geometry = Some(Geometry::Polygon(p));
            row.set("area_id", area_id);
            row.set("q", h.q);
            row.set("r", h.r);
            row.set("size", size);
            row.set("cx", c.x);
            row.set("cy", c.y);
            row.set("status", status);
            row.set("cumulated_ms", ms);
            if row.id == 0 {
                tx.insert(HEX_GRID, row)?;
            } else {
                tx.update_if_changed(HEX_GRID, row)?;
            }
        }
        for (_, stale) in old_by_hex {
            tx.delete(HEX_GRID, stale.id)?;
        }
    }
    Ok(())
}

pub fn schemas() -> Vec<Schema> {
    vec![
        Schema::new(SCREEN_EXTENT, GeometryKind::Polygon)
            .attr("user_id", AttrType::Text)
            .attr("t", AttrType::Integer)
            .nullable("scale", AttrType::Real),
        Schema::new(WORK_AREA, GeometryKind::Polygon).nullable("size", AttrType::Real),
        Schema::new(HEX_GRID, GeometryKind::Polygon)
            .attr("area_id", AttrType::Integer)
            .attr("q", AttrType::Integer)
            .attr("r", AttrType::Integer)
            .attr("size", AttrType::Real)
            .attr("cx", AttrType::Real)
            .attr("cy", AttrType::Real)
            .attr("status", AttrType::Text)
            .attr("cumulated_ms", AttrType::Integer)
            .generated(),
    ]
}

pub fn install(store: &mut Store) -> Result<()> {
    use ChangeKind::*;
    for s in schemas() {
        store.create_layer(s)?;
    }
    store.register_handler("round_extent", Handler::row(round_and_check_extent))?;
    store.register_handler("extent_effects", Handler::row(record_extent_effects))?;
    store.register_handler("check_work_area", Handler::row(check_work_area))?;
    store.register_handler("regenerate_grids", Handler::deferred(regenerate_grids))?;
    store.register_handler("conflicts", Handler::derived(conflicts))?;
    store.register_trigger(TriggerSpec::new(
        "round_extent",
        SCREEN_EXTENT,
        Timing::Before,
        &[Insert, Update, Delete],
        "round_extent",
    ))?;
    store.register_trigger(TriggerSpec::new("extent_effects", SCREEN_EXTENT, Timing::After, &[Insert], "extent_effects"))?;
    store.register_trigger(TriggerSpec::new(
        "check_work_area",
        WORK_AREA,
        Timing::Before,
        &[Insert, Update],
        "check_work_area",
    ))?;
    store.register_trigger(TriggerSpec::new(
        "regenerate_grids",
        WORK_AREA,
        Timing::Deferred,
        &[Insert, Update, Delete],
        "regenerate_grids",
    ))?;
    store.register_derived(
        Schema::new(CONFLICTS, GeometryKind::Point)
            .attr("kind", AttrType::Text)
            .attr("user_a", AttrType::Text)
            .attr("user_b", AttrType::Text)
            .attr("extent_a", AttrType::Integer)
            .attr("extent_b", AttrType::Integer)
            .attr("overlap_m2", AttrType::Real),
        "conflicts",
    )?;
    Ok(())
}

/// Grid sweeps: cells of one area do not overlap and cover the area.
pub fn violations(store: &Store) -> Vec<String> {
    let mut out = Vec::new();
    let (Ok(areas), Ok(grid)) = (store.layer(WORK_AREA), store.layer(HEX_GRID)) else { return out };
    let mut by_area: BTreeMap<FeatureId, Vec<&Feature>> = BTreeMap::new();
    for c in grid.features() {
        match c.fid("area_id") {
            Some(a) if areas.get(a).is_some() => by_area.entry(a).or_default().push(c),
            _ => out.push(format!("hex_grid {} belongs to no work area", c.id)),
        }
    }
    for area in areas.features() {
        let (Some(poly), cells) = (area.polygon_geometry(), by_area.remove(&area.id).unwrap_or_default()) else {
            continue;
        };
        let size = area.real("size").unwrap_or(store.config().hex_size_m);
        let have: BTreeSet<Hex> = cells
            .iter()
            .filter_map(|c| Some(Hex { q: c.int("q")?, r: c.int("r")? }))
            .collect();
        if have.len() != cells.len() {
            out.push(format!("work_area {} has duplicate cells", area.id));
        }
        for c in &cells {
            let Some(p) = c.polygon_geometry() else { continue };
            let h = Hex { q: c.int("q").unwrap_or(0), r: c.int("r").unwrap_or(0) };
            let expected = h.polygon(size);
            let off = p.exterior_vertices().iter().zip(expected.exterior_vertices()).any(|(a, b)| a.distance(b) > 1e-9);
            if c.real("size") != Some(size) || off {
                out.push(format!("hex_grid {} is not the lattice cell ({}, {})", c.id, h.q, h.r));
            }
            if polygon_intersection_area(p, poly) <= 0.0 {
                out.push(format!("hex_grid {} lies outside work_area {}", c.id, area.id));
            }
        }
        for h in cover(poly, size) {
            if !have.contains(&h) {
                out.push(format!("work_area {} is missing cell ({}, {})", area.id, h.q, h.r));
            }
        }
    }
    out
}
