mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use common::*;
use streetbase_core::model::check::violations;
use streetbase_core::model::names::*;
use streetbase_core::model::objects::{fit_crossing, sections, Crossing};
use streetbase_core::model::Network;
use streetbase_core::store::{ChangeRecord, ChangeSet, Feature, Geometry, Origin, Store, Value};
use streetbase_core::EngineError;
use streetbase_geom::{angle_mod_pi, Point, Polygon, Vec2};

fn object(s: &mut Store, x: f64, y: f64, mode: &str) -> u64 {
    let f = Feature::point(Point::new(x, y)).with("class", "bench").with("position_mode", mode);
    by_user(s, ChangeRecord::insert(EDIT_OBJECT, f)).unwrap().inserted_id(EDIT_OBJECT).unwrap()
}

fn get(s: &Store, id: u64) -> Feature {
    s.get(STREET_OBJECT, id).unwrap().unwrap()
}

fn pos(s: &Store, id: u64) -> Point {
    *get(s, id).point_geometry().unwrap()
}

fn move_object(s: &mut Store, id: u64, p: Point) {
    let mut f = get(s, id);
    f.geometry = Some(Geometry::Point(p));
    update_view(s, EDIT_OBJECT, f).unwrap();
}

/// Moves nodes in one change set.
fn move_nodes(s: &mut Store, moves: &[((f64, f64), (f64, f64))]) {
    let mut cs = ChangeSet::new(Origin::user("tester"));
    for ((x, y), (nx, ny)) in moves {
        let id = node_at(s, *x, *y);
        let mut f = s.get(EDIT_NODE, id).unwrap().unwrap();
        f.geometry = Some(Geometry::Point(Point::new(*nx, *ny)));
        cs.push(ChangeRecord::update(EDIT_NODE, id, f));
    }
    s.apply(cs).unwrap();
}

#[test]
fn relative_object_projects_onto_the_axis() {
    let mut s = store();
    let e = network(&mut s, &[&[(0.0, 0.0), (50.0, 0.0)]])[0];
    let o = object(&mut s, 20.0, 3.0, "axis");
    let f = get(&s, o);
    assert_eq!(f.fid("ref_edge"), Some(e));
    assert!((f.real("s").unwrap() - 20.0).abs() < 1e-12);
    assert!((f.real("d").unwrap() - 3.0).abs() < 1e-12);
    assert!(pos(&s, o).distance(&Point::new(20.0, 3.0)) < 1e-12);
}

#[test]
fn relative_object_needs_an_axis() {
    let mut s = store();
    let f = Feature::point(Point::new(1.0, 1.0)).with("position_mode", "axis");
    let err = by_user(&mut s, ChangeRecord::insert(EDIT_OBJECT, f)).unwrap_err();
    assert!(matches!(err, EngineError::Misconfigured(_)), "{err}");
}

#[test]
fn absolute_object_ignores_axis_edits() {
    let mut s = store();
    network(&mut s, &[&[(0.0, 0.0), (50.0, 0.0)]]);
    let o = object(&mut s, 20.0, 3.0, "absolute");
    let before = get(&s, o);
    assert!(before.get("ref_edge").is_null() && before.get("s").is_null());
    move_nodes(&mut s, &[((0.0, 0.0), (0.0, 5.0)), ((50.0, 0.0), (50.0, 5.0))]);
    assert_eq!(get(&s, o), before);
}

#[test]
fn nearest_axis_becomes_the_reference() {
    let mut s = store();
    let e = network(&mut s, &[&[(0.0, 0.0), (50.0, 0.0)], &[(0.0, 30.0), (50.0, 30.0)]]);
    let o = object(&mut s, 10.0, 18.0, "axis");
    assert_eq!(get(&s, o).fid("ref_edge"), Some(e[1]));
    assert!((get(&s, o).real("d").unwrap() + 12.0).abs() < 1e-12);

    move_object(&mut s, o, Point::new(14.0, 4.0));
    let f = get(&s, o);
    assert_eq!(f.fid("ref_edge"), Some(e[0]));
    assert!((f.real("s").unwrap() - 14.0).abs() < 1e-12 && (f.real("d").unwrap() - 4.0).abs() < 1e-12);

    move_object(&mut s, o, Point::new(16.0, 5.0));
    let f = get(&s, o);
    assert_eq!(f.fid("ref_edge"), Some(e[0]));
    assert!((f.real("s").unwrap() - 16.0).abs() < 1e-12 && (f.real("d").unwrap() - 5.0).abs() < 1e-12);
}

#[test]
fn system_rewrite_of_an_object_is_not_interpreted() {
    let mut s = store();
    network(&mut s, &[&[(0.0, 0.0), (50.0, 0.0)]]);
    let o = object(&mut s, 20.0, 3.0, "axis");
    let mut f = get(&s, o);
    f.geometry = Some(Geometry::Point(Point::new(30.0, -2.0)));
    s.transact(|tx| tx.update(STREET_OBJECT, f.clone())).unwrap();
    let after = get(&s, o);
    assert_eq!(after.real("s"), Some(20.0));
    assert_eq!(after.real("d"), Some(3.0));
    assert!(pos(&s, o).same_xy(&Point::new(30.0, -2.0)));
}

#[test]
fn translating_the_axis_translates_its_objects() {
    let mut s = store();
    network(&mut s, &[&[(0.0, 0.0), (50.0, 0.0)]]);
    let ids: Vec<u64> = [(10.0, 2.0), (25.0, -3.0), (40.0, 0.5)]
        .iter()
        .map(|(x, y)| object(&mut s, *x, *y, "axis"))
        .collect();
    let before: Vec<Point> = ids.iter().map(|o| pos(&s, *o)).collect();
    let v = Vec2::new(3.0, 7.0);
    move_nodes(&mut s, &[((0.0, 0.0), (3.0, 7.0)), ((50.0, 0.0), (53.0, 7.0))]);
    for (o, p) in ids.iter().zip(before) {
        assert!(pos(&s, *o).distance(&(p + v)) < 1e-9);
    }
    assert!(violations(&s).is_empty(), "{:?}", violations(&s));
}

#[test]
fn rotating_the_axis_carries_relative_orientation() {
    let mut s = store();
    network(&mut s, &[&[(0.0, 0.0), (50.0, 0.0)]]);
    let f = Feature::point(Point::new(20.0, 3.0))
        .with("position_mode", "axis")
        .with("orientation_mode", "relative")
        .with("theta_abs", 0.25);
    let o = by_user(&mut s, ChangeRecord::insert(EDIT_OBJECT, f)).unwrap().inserted_id(EDIT_OBJECT).unwrap();
    assert!((get(&s, o).real("theta_rel").unwrap() - 0.25).abs() < 1e-12);
    move_nodes(&mut s, &[((50.0, 0.0), (0.0, 50.0))]);
    let f = get(&s, o);
    assert!((f.real("theta_abs").unwrap() - (FRAC_PI_2 + 0.25)).abs() < 1e-12);
    assert!(pos(&s, o).distance(&Point::new(-3.0, 20.0)) < 1e-9);
}

#[test]
fn sidewalk_objects_follow_the_border() {
    let mut s = store();
    let e = network(&mut s, &[&[(0.0, 0.0), (50.0, 0.0)]])[0];
    let o = object(&mut s, 20.0, 5.5, "sidewalk");
    let f = get(&s, o);
    assert!((f.real("d").unwrap() - 1.5).abs() < 1e-12);
    assert_eq!(f.int("side"), Some(1));
    let row = s.get(EDIT_EDGE, e).unwrap().unwrap().with("width", 12.0);
    update_view(&mut s, EDIT_EDGE, row).unwrap();
    // Two more metres of half-width push the object out by the same.
    assert!(pos(&s, o).distance(&Point::new(20.0, 7.5)) < 1e-12);
}

#[test]
fn shortened_axis_clamps_the_abscissa() {
    let mut s = store();
    network(&mut s, &[&[(0.0, 0.0), (50.0, 0.0)]]);
    let o = object(&mut s, 45.0, 2.0, "axis");
    move_nodes(&mut s, &[((50.0, 0.0), (30.0, 0.0))]);
    let f = get(&s, o);
    assert_eq!(f.flag("clamped"), Some(true));
    assert!((f.real("s").unwrap() - 30.0).abs() < 1e-12);
    assert!(pos(&s, o).distance(&Point::new(30.0, 2.0)) < 1e-12);
}

#[test]
fn manual_relative_parameters_move_the_point() {
    let mut s = store();
    let e = network(&mut s, &[&[(0.0, 0.0), (50.0, 0.0)], &[(0.0, 30.0), (50.0, 30.0)]]);
    let o = object(&mut s, 10.0, 2.0, "axis");
    let edited = get(&s, o).with("ref_edge", e[1]).with("s", 5.0).with("d", 1.0);
    update_view(&mut s, EDIT_OBJECT, edited).unwrap();
    assert!(pos(&s, o).distance(&Point::new(5.0, 31.0)) < 1e-12);
    assert_eq!(get(&s, o).fid("ref_edge"), Some(e[1]));
}

#[test]
fn deleting_an_axis_detaches_objects_and_drops_crossings() {
    let mut s = store();
    let e = network(&mut s, &[&[(0.0, 0.0), (50.0, 0.0)], &[(0.0, 30.0), (50.0, 30.0)]]);
    let ids: Vec<u64> = [(10.0, 2.0), (25.0, -3.0), (40.0, 5.5)]
        .iter()
        .map(|(x, y)| object(&mut s, *x, *y, "axis"))
        .collect();
    let other = object(&mut s, 10.0, 28.0, "axis");
    let before: Vec<Point> = ids.iter().map(|o| pos(&s, *o)).collect();
    by_user(&mut s, ChangeRecord::insert(EDIT_PEDESTRIAN_CROSSING, Feature::polygon(rect(20.0, 0.0, 4.0, 8.0)))).unwrap();
    assert_eq!(rows(&s, PEDESTRIAN_CROSSING).len(), 1);

    by_user(&mut s, ChangeRecord::delete(EDIT_EDGE, e[0])).unwrap();
    for (o, p) in ids.iter().zip(before) {
        let f = get(&s, *o);
        assert_eq!(f.text("position_mode"), Some("absolute"));
        for k in ["ref_edge", "s", "d", "side", "theta_rel"] {
            assert_eq!(f.get(k), &Value::Null);
        }
        assert!(pos(&s, *o).same_xy(&p));
    }
    assert_eq!(get(&s, other).fid("ref_edge"), Some(e[1]));
    assert!(rows(&s, PEDESTRIAN_CROSSING).is_empty());
    assert!(violations(&s).is_empty(), "{:?}", violations(&s));
}

/// Axis-aligned rectangle centred on `(cx, cy)`, `w` along x, `h` along y.
fn rect(cx: f64, cy: f64, w: f64, h: f64) -> Polygon {
    Polygon::from_open_ring(vec![
        Point::new(cx - w / 2.0, cy - h / 2.0),
        Point::new(cx + w / 2.0, cy - h / 2.0),
        Point::new(cx + w / 2.0, cy + h / 2.0),
        Point::new(cx - w / 2.0, cy + h / 2.0),
    ])
    .unwrap()
}

fn fit(s: &Store, poly: &Polygon) -> Result<Crossing, EngineError> {
    fit_crossing(&Network::load(s), &sections(s), poly)
}

fn straight_road() -> Store {
    let mut s = store();
    network(&mut s, &[&[(0.0, 0.0), (50.0, 0.0)]]);
    s
}

#[test]
fn exact_rectangle_fits_itself() {
    let mut s = straight_road();
    let input = rect(20.0, 0.0, 4.0, 8.0);
    let c = fit(&s, &input).unwrap();
    assert!((c.orientation - FRAC_PI_2).abs() < 1e-12);
    assert!((c.width - 4.0).abs() < 1e-12);
    assert!((c.s - 20.0).abs() < 1e-12);
    let id = by_user(&mut s, ChangeRecord::insert(EDIT_PEDESTRIAN_CROSSING, Feature::polygon(input.clone())))
        .unwrap()
        .inserted_id(EDIT_PEDESTRIAN_CROSSING)
        .unwrap();
    let stored = s.get(PEDESTRIAN_CROSSING, id).unwrap().unwrap();
    let canon = stored.polygon_geometry().unwrap();
    assert!((canon.area() - input.area()).abs() < 1e-9);
    for p in input.exterior_vertices() {
        assert!(canon.exterior_vertices().iter().any(|q| q.distance(p) < 1e-9));
    }
}

#[test]
fn rotated_rectangle_recovers_its_direction() {
    let s = straight_road();
    let c0 = Point::new(20.0, 0.0);
    let input = rect(20.0, 0.0, 4.0, 8.0).rotate_about(&c0, 15f64.to_radians());
    let c = fit(&s, &input).unwrap();
    assert!((c.orientation - 105f64.to_radians()).abs() < 1e-6);
}

#[test]
fn rough_triangle_still_gives_a_crossing() {
    let mut s = straight_road();
    let tri = Polygon::from_open_ring(vec![Point::new(18.0, -4.5), Point::new(22.0, -4.0), Point::new(20.5, 4.5)]).unwrap();
    let cs = by_user(&mut s, ChangeRecord::insert(EDIT_PEDESTRIAN_CROSSING, Feature::polygon(tri))).unwrap();
    let id = cs.inserted_id(EDIT_PEDESTRIAN_CROSSING).unwrap();
    let f = s.get(PEDESTRIAN_CROSSING, id).unwrap().unwrap();
    assert!(f.real("width").unwrap() > 0.0);
}

#[test]
fn crossing_off_the_road_is_refused() {
    let mut s = straight_road();
    let err = by_user(
        &mut s,
        ChangeRecord::insert(EDIT_PEDESTRIAN_CROSSING, Feature::polygon(rect(20.0, 40.0, 4.0, 8.0))),
    )
    .unwrap_err();
    assert!(matches!(err, EngineError::NotOnRoad(_)), "{err}");
}

#[test]
fn fitting_a_canonical_polygon_is_idempotent() {
    let mut s = straight_road();
    let tri = Polygon::from_open_ring(vec![Point::new(18.0, -4.5), Point::new(23.0, -3.0), Point::new(20.5, 4.5)]).unwrap();
    let id = by_user(&mut s, ChangeRecord::insert(EDIT_PEDESTRIAN_CROSSING, Feature::polygon(tri)))
        .unwrap()
        .inserted_id(EDIT_PEDESTRIAN_CROSSING)
        .unwrap();
    let f = s.get(PEDESTRIAN_CROSSING, id).unwrap().unwrap();
    let c = fit(&s, f.polygon_geometry().unwrap()).unwrap();
    assert!((c.s - f.real("s").unwrap()).abs() < 1e-9);
    assert!((c.width - f.real("width").unwrap()).abs() < 1e-9);
    assert!((angle_mod_pi(c.orientation) - f.real("orientation").unwrap()).abs() < 1e-9);
}

#[test]
fn editing_the_canonical_polygon_refits() {
    let mut s = straight_road();
    let id = by_user(&mut s, ChangeRecord::insert(EDIT_PEDESTRIAN_CROSSING, Feature::polygon(rect(20.0, 0.0, 4.0, 8.0))))
        .unwrap()
        .inserted_id(EDIT_PEDESTRIAN_CROSSING)
        .unwrap();
    let f = s.get(PEDESTRIAN_CROSSING, id).unwrap().unwrap();
    let mut moved = f.clone();
    moved.geometry = Some(Geometry::Polygon(f.polygon_geometry().unwrap().translated(Vec2::new(2.0, 0.0))));
    update_view(&mut s, EDIT_PEDESTRIAN_CROSSING, moved).unwrap();
    let g = s.get(PEDESTRIAN_CROSSING, id).unwrap().unwrap();
    assert!((g.real("s").unwrap() - 22.0).abs() < 1e-6);
    assert!((g.real("width").unwrap() - 4.0).abs() < 1e-6);
    assert!((g.real("orientation").unwrap() - FRAC_PI_2).abs() < 1e-6);

    let mut wide = g.clone();
    wide.geometry = Some(Geometry::Polygon(rect(22.0, 0.0, 6.0, 8.0)));
    update_view(&mut s, EDIT_PEDESTRIAN_CROSSING, wide).unwrap();
    let h = s.get(PEDESTRIAN_CROSSING, id).unwrap().unwrap();
    assert!((h.real("width").unwrap() - 6.0).abs() < 1e-6);

    // A system rewrite of the polygon keeps the parameters.
    let mut sys = h.clone();
    sys.geometry = Some(Geometry::Polygon(rect(30.0, 0.0, 2.0, 8.0)));
    s.transact(|tx| tx.update(PEDESTRIAN_CROSSING, sys.clone())).unwrap();
    let k = s.get(PEDESTRIAN_CROSSING, id).unwrap().unwrap();
    assert_eq!(k.real("width"), h.real("width"));
    assert_eq!(k.real("s"), h.real("s"));
}

#[test]
fn crossing_orientation_stays_in_half_turn() {
    let s = straight_road();
    let input = rect(20.0, 0.0, 4.0, 8.0).rotate_about(&Point::new(20.0, 0.0), PI - 0.2);
    let c = fit(&s, &input).unwrap();
    assert!((0.0..PI).contains(&c.orientation));
}

#[test]
fn steep_crossing_keeps_its_width() {
    // At 65° the axis leaves the rectangle through its short sides.
    let s = straight_road();
    let input = rect(20.0, 0.0, 4.0, 8.0).rotate_about(&Point::new(20.0, 0.0), 65f64.to_radians());
    let c = fit(&s, &input).unwrap();
    assert!((c.width - 4.0).abs() < 1e-9, "{}", c.width);
    assert!((c.orientation - 155f64.to_radians()).abs() < 1e-9);
}
