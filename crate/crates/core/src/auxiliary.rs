//! Standalone controllers: a lens choosing which points are shown, and an
//! altimetry profile that edits the heights of a 3D line in plan view.

use streetbase_geom::{GeomError, Point, Polygon, Polyline};

use crate::error::EngineError;
use crate::store::{AttrType, ChangeKind, ChangeRecord, Feature, FeatureId, Geometry, GeometryKind, Schema, Store};
use crate::trigger::{Handler, ProxyView, Result, Timing, TriggerSpec, Tx};

pub const LENS: &str = "lens";
pub const POINT_CLOUD: &str = "point_cloud";
pub const LENS_POINTS: &str = "lens_points";
pub const ALTI_LINE: &str = "alti_line";
pub const ALTI_PROFILE: &str = "alti_profile";
/// Stored profiles behind the `alti_profile` view.
pub const ALTI_PROFILE_ROWS: &str = "alti_profile_rows";

/// Points shown through a lens: inside the polygon, of the requested pass,
/// and of rank divisible by 4^lod in the id order of the whole point set.
///
/// Ranking over the whole set keeps the output of a lens a subset of the
/// output of any larger lens at the same level.
pub fn lens_filter(polygon: &Polygon, lod: u32, pass: Option<i64>, points: &[Feature]) -> Vec<Feature> {
    let k = 4u64.saturating_pow(lod);
    let mut ranked: Vec<&Feature> = points.iter().collect();
    ranked.sort_by_key(|f| f.id);
    ranked
        .into_iter()
        .enumerate()
        .filter(|(rank, _)| *rank as u64 % k == 0)
        .map(|(_, f)| f)
        .filter(|f| pass.is_none() || f.int("pass") == pass)
        .filter(|f| f.point_geometry().is_some_and(|p| polygon.contains_point(p)))
        .cloned()
        .collect()
}

fn lens_points(store: &Store) -> Vec<Feature> {
    let (Ok(lenses), Ok(points)) = (store.layer(LENS), store.layer(POINT_CLOUD)) else {
        return Vec::new();
    };
    let points: Vec<Feature> = points.features().cloned().collect();
    let mut out = Vec::new();
    for lens in lenses.features() {
        let Some(poly) = lens.polygon_geometry() else { continue };
        let lod = lens.int("lod").unwrap_or(0).max(0) as u32;
        for mut p in lens_filter(poly, lod, lens.int("pass"), &points) {
            p.set("lens_id", lens.id);
            out.push(p);
        }
    }
    out
}

fn check_lens(_tx: &mut Tx<'_>, rec: &mut ChangeRecord) -> Result<()> {
    if let Some(f) = rec.new.as_ref() {
        if f.int("lod").is_some_and(|l| l < 0) {
            return Err(EngineError::rejected(LENS, "lod must be zero or more"));
        }
    }
    Ok(())
}

/// Profile of a 3D line: each vertex pushed left along the local
/// perpendicular by its height above `z_min`.
pub fn profile(line: &Polyline, z_min: f64) -> std::result::Result<Polyline, GeomError> {
    let lengths = line.cumulative_lengths();
    let mut pts = Vec::with_capacity(lengths.len());
    for (v, s) in line.vertices().iter().zip(lengths) {
        let z = v.z.ok_or_else(|| GeomError::InvalidGeometry("every vertex of an altimetry line needs a z value".into()))?;
        let (p, _) = line.point_at(s, z - z_min)?;
        pts.push(Point::new(p.x, p.y));
    }
    Polyline::new(pts)
}

pub fn lowest_z(line: &Polyline) -> Option<f64> {
    line.vertices().iter().map(|v| v.z).try_fold(f64::INFINITY, |m, z| z.map(|z| m.min(z)))
}

/// Heights read back from an edited profile. Vertices that did not move
/// keep their height.
pub fn interpret_profile(line: &Polyline, old: &Polyline, edited: &Polyline, z_min: f64) -> Result<Polyline> {
    let n = line.vertices().len();
    if edited.vertices().len() != n || old.vertices().len() != n {
        return Err(EngineError::AmbiguousEdit(format!(
            "the profile must keep its {n} vertices; add or remove vertices on the 3D line instead"
        )));
    }
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let src = line.vertices()[i];
        let (before, after) = (old.vertices()[i], edited.vertices()[i]);
        let z = if before.same_xy(&after) {
            src.z
        } else {
            Some(z_min + Point::new(src.x, src.y).distance(&after))
        };
        pts.push(Point { z, ..src });
    }
    Ok(Polyline::new(pts)?)
}

fn profile_row(tx: &Tx<'_>, line_id: FeatureId) -> Option<Feature> {
    tx.layer(ALTI_PROFILE_ROWS)
        .ok()?
        .features()
        .find(|f| f.fid("line_id") == Some(line_id))
        .cloned()
}

fn check_alti_line(_tx: &mut Tx<'_>, rec: &mut ChangeRecord) -> Result<()> {
    if let Some(line) = rec.new.as_ref().and_then(|f| f.polyline_geometry()) {
        if lowest_z(line).is_none() {
            return Err(GeomError::InvalidGeometry("every vertex of an altimetry line needs a z value".into()).into());
        }
    }
    Ok(())
}

/// Keeps the profile of a line in step with it. The datum never rises:
/// an existing profile keeps its `z_min` unless the line goes lower.
fn sync_profile(tx: &mut Tx<'_>, rec: &mut ChangeRecord) -> Result<()> {
    let Some(line_id) = rec.id else { return Ok(()) };
    let existing = profile_row(tx, line_id);
    let Some(line) = rec.new.as_ref().and_then(|f| f.polyline_geometry()).cloned() else {
        if let Some(p) = existing {
            tx.delete(ALTI_PROFILE_ROWS, p.id)?;
        }
        return Ok(());
    };
    let current = lowest_z(&line).ok_or_else(|| GeomError::InvalidGeometry("altimetry line without z".into()))?;
    let z_min = existing
        .as_ref()
        .and_then(|p| p.real("z_min"))
        .map_or(current, |frozen| frozen.min(current));
    let geometry = Geometry::Polyline(profile(&line, z_min)?);
    match existing {
        Some(mut p) => {
            p.geometry = Some(geometry);
            p.set("z_min", z_min);
            tx.update_if_changed(ALTI_PROFILE_ROWS, p)?;
        }
        None => {
            let f = Feature::new(Some(geometry)).with("line_id", line_id).with("z_min", z_min);
            tx.insert(ALTI_PROFILE_ROWS, f)?;
        }
    }
    Ok(())
}

fn profile_update(tx: &mut Tx<'_>, rec: &ChangeRecord) -> Result<Option<FeatureId>> {
    let old = rec.old.as_ref().expect("view updates carry the current row");
    let new = rec.new.as_ref().expect("view updates carry a payload");
    let Some(edited) = new.polyline_geometry() else {
        return Ok(Some(old.id));
    };
    let line_id = old
        .fid("line_id")
        .ok_or_else(|| EngineError::invalid(ALTI_PROFILE, "profile without a line"))?;
    let mut line = tx
        .get(ALTI_LINE, line_id)
        .cloned()
        .ok_or_else(|| EngineError::NotFound(format!("alti_line {line_id}")))?;
    let source = line
        .polyline_geometry()
        .ok_or_else(|| EngineError::invalid(ALTI_LINE, "altimetry line without geometry"))?;
    let before = old
        .polyline_geometry()
        .ok_or_else(|| EngineError::invalid(ALTI_PROFILE, "profile without geometry"))?;
    let z_min = old.real("z_min").unwrap_or(0.0);
    let heights = interpret_profile(source, before, edited, z_min)?;
    line.geometry = Some(Geometry::Polyline(heights));
    tx.update_if_changed(ALTI_LINE, line)?;
    Ok(Some(old.id))
}

pub fn schemas() -> Vec<Schema> {
    vec![
        Schema::new(LENS, GeometryKind::Polygon)
            .attr("lod", AttrType::Integer)
            .nullable("pass", AttrType::Integer),
        Schema::new(POINT_CLOUD, GeometryKind::Point).nullable("pass", AttrType::Integer),
        Schema::new(ALTI_LINE, GeometryKind::Polyline),
        Schema::new(ALTI_PROFILE_ROWS, GeometryKind::Polyline)
            .attr("line_id", AttrType::Integer)
            .attr("z_min", AttrType::Real)
            .generated(),
    ]
}

pub fn install(store: &mut Store) -> Result<()> {
    use ChangeKind::*;
    for s in schemas() {
        store.create_layer(s)?;
    }
    store.register_handler("check_lens", Handler::row(check_lens))?;
    store.register_handler("lens_points", Handler::derived(lens_points))?;
    store.register_handler("check_alti_line", Handler::row(check_alti_line))?;
    store.register_handler("sync_profile", Handler::row(sync_profile))?;
    store.register_handler("profile_update", Handler::view(profile_update))?;
    store.register_trigger(TriggerSpec::new("check_lens", LENS, Timing::Before, &[Insert, Update], "check_lens"))?;
    store.register_trigger(TriggerSpec::new(
        "check_alti_line",
        ALTI_LINE,
        Timing::Before,
        &[Insert, Update],
        "check_alti_line",
    ))?;
    store.register_trigger(TriggerSpec::new(
        "sync_profile",
        ALTI_LINE,
        Timing::After,
        &[Insert, Update, Delete],
        "sync_profile",
    ))?;
    store.register_view(
        ProxyView::new(ALTI_PROFILE, ALTI_PROFILE_ROWS)
            .on(Update, "profile_update")
            .refuse(Insert, "profiles are generated from alti_line")
            .refuse(Delete, "delete the alti_line instead"),
    )?;
    store.register_derived(
        Schema::new(LENS_POINTS, GeometryKind::Point)
            .nullable("pass", AttrType::Integer)
            .attr("lens_id", AttrType::Integer),
        "lens_points",
    )?;
    Ok(())
}

/// Point features from a GeoJSON FeatureCollection of points, ready to be
/// inserted into `point_cloud`.
pub fn points_from_geojson(v: &serde_json::Value) -> std::result::Result<Vec<Feature>, String> {
    let features = v
        .get("features")
        .and_then(|f| f.as_array())
        .ok_or("expected a FeatureCollection")?;
    let mut out = Vec::with_capacity(features.len());
    for f in features {
        let parsed = Feature::from_geojson(f)?;
        let Some(p) = parsed.point_geometry() else {
            return Err("point_cloud features must be points".into());
        };
        let mut row = Feature::point(*p);
        if let Some(pass) = parsed.int("pass") {
            row.set("pass", pass);
        }
        out.push(row);
    }
    Ok(out)
}
