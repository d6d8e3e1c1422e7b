use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use proptest::prelude::*;
use streetbase_core::store::{
    AttrType, ChangeKind, ChangeRecord, ChangeSet, Feature, GeometryKind, Origin, Schema, Store,
};
use streetbase_core::trigger::{Handler, OverrideBinding, ProxyView, Timing, TriggerSpec};
use streetbase_core::{Config, EngineError};
use streetbase_geom::{Point, Polygon, Polyline};

use ChangeKind::{Delete, Insert, Update};

fn user() -> Origin {
    Origin::user("bob@10.0.0.2")
}

fn commit(store: &mut Store, rec: ChangeRecord) -> Result<ChangeSet, EngineError> {
    store.apply(ChangeSet::new(user()).with(rec))
}

fn counter_layer(store: &mut Store, name: &str) {
    store
        .create_layer(Schema::new(name, GeometryKind::None).attr("n", AttrType::Integer))
        .unwrap();
}

#[test]
fn before_trigger_makes_width_positive() {
    let mut store = Store::new(Config::default());
    store
        .create_layer(Schema::new("road_axis", GeometryKind::Polyline).attr("width", AttrType::Real))
        .unwrap();
    store
        .register_handler(
            "abs_width",
            Handler::row(|_, rec| {
                if let Some(f) = rec.new.as_mut() {
                    if let Some(w) = f.real("width") {
                        f.set("width", w.abs());
                    }
                }
                Ok(())
            }),
        )
        .unwrap();
    store
        .register_trigger(TriggerSpec::new("abs_width", "road_axis", Timing::Before, &[Insert, Update], "abs_width"))
        .unwrap();
    let line = Polyline::from_xy(&[(0.0, 0.0), (5.0, 0.0)]).unwrap();
    let cs = commit(&mut store, ChangeRecord::insert("road_axis", Feature::polyline(line.clone()).with("width", 2.0))).unwrap();
    let id = cs.records[0].id.unwrap();
    commit(&mut store, ChangeRecord::update("road_axis", id, Feature::polyline(line).with("width", -3.0))).unwrap();
    assert_eq!(store.get("road_axis", id).unwrap().unwrap().real("width"), Some(3.0));
}

#[test]
fn before_insert_projects_door_onto_building() {
    let mut store = Store::new(Config::default());
    store
        .create_layer(Schema::new("building", GeometryKind::Polygon))
        .unwrap();
    store
        .create_layer(Schema::new("door", GeometryKind::Point).attr("building", AttrType::Integer))
        .unwrap();
    store
        .register_handler(
            "snap_door",
            Handler::row(|tx, rec| {
                let new = rec.new.as_mut().unwrap();
                let b = tx
                    .get("building", new.fid("building").unwrap())
                    .ok_or_else(|| EngineError::NotFound("building".into()))?;
                let ring = Polyline::new(b.polygon_geometry().unwrap().exterior().to_vec())?;
                let foot = ring.project(new.point_geometry().unwrap()).foot;
                new.geometry = Some(streetbase_core::store::Geometry::Point(foot));
                Ok(())
            }),
        )
        .unwrap();
    store
        .register_trigger(TriggerSpec::new("snap_door", "door", Timing::Before, &[Insert, Update], "snap_door"))
        .unwrap();
    let square = Polygon::from_open_ring(vec![
        Point::new(0.0, 0.0),
        Point::new(10.0, 0.0),
        Point::new(10.0, 10.0),
        Point::new(0.0, 10.0),
    ])
    .unwrap();
    let b = commit(&mut store, ChangeRecord::insert("building", Feature::polygon(square.clone()))).unwrap().records[0]
        .id
        .unwrap();
    let d = commit(
        &mut store,
        ChangeRecord::insert("door", Feature::point(Point::new(4.0, 1.5)).with("building", b)),
    )
    .unwrap()
    .records[0]
        .id
        .unwrap();
    let door = *store.get("door", d).unwrap().unwrap().point_geometry().unwrap();
    assert!(square.boundary_distance(&door) < 1e-12);
    assert_eq!((door.x, door.y), (4.0, 0.0));
}

/// Degree/radian columns kept in sync by an after trigger that only writes
/// when the pair is incoherent.
fn angle_store() -> Store {
    let mut store = Store::new(Config::default());
    store
        .create_layer(
            Schema::new("heading", GeometryKind::None)
                .attr("deg", AttrType::Real)
                .attr("rad", AttrType::Real),
        )
        .unwrap();
    store
        .register_handler(
            "sync_angle",
            Handler::row(|tx, rec| {
                let (Some(new), old) = (rec.new.clone(), rec.old.clone()) else {
                    return Ok(());
                };
                let deg = new.real("deg").unwrap();
                let rad = new.real("rad").unwrap();
                if (deg - rad.to_degrees()).abs() <= 1e-12 * deg.abs().max(1.0) {
                    return Ok(());
                }
                let deg_changed = old.as_ref().map_or(true, |o| o.real("deg") != Some(deg));
                let mut fixed = new;
                if deg_changed {
                    fixed.set("rad", deg * PI / 180.0);
                } else {
                    fixed.set("deg", rad * 180.0 / PI);
                }
                tx.update("heading", fixed)
            }),
        )
        .unwrap();
    store
        .register_trigger(TriggerSpec::new("sync_angle", "heading", Timing::After, &[Insert, Update], "sync_angle"))
        .unwrap();
    store
}

#[test]
fn after_trigger_keeps_degrees_and_radians_in_sync() {
    let mut store = angle_store();
    let cs = commit(
        &mut store,
        ChangeRecord::insert("heading", Feature::default().with("deg", 90.0).with("rad", 0.0)),
    )
    .unwrap();
    let id = cs.records[0].id.unwrap();
    // Fixpoint after one corrective cascade.
    assert_eq!(cs.len(), 2);
    let f = store.get("heading", id).unwrap().unwrap();
    assert!((f.real("deg").unwrap() - f.real("rad").unwrap() * 180.0 / PI).abs() < 1e-12);
    let cs = commit(
        &mut store,
        ChangeRecord::update("heading", id, f.clone().with("rad", PI / 4.0)),
    )
    .unwrap();
    assert!(cs.len() <= 2);
    let f = store.get("heading", id).unwrap().unwrap();
    assert!((f.real("deg").unwrap() - 45.0).abs() < 1e-12);
    // Coherent edit: the trigger inspects old/new and does nothing.
    let cs = commit(&mut store, ChangeRecord::update("heading", id, f)).unwrap();
    assert_eq!(cs.len(), 1);
}

fn ping_pong(store: &mut Store, conditional: bool) {
    counter_layer(store, "ping");
    counter_layer(store, "pong");
    for (from, to) in [("ping", "pong"), ("pong", "ping")] {
        let name = format!("{from}_to_{to}");
        let to = to.to_string();
        store
            .register_handler(
                &name,
                Handler::row(move |tx, rec| {
                    let n = rec.new.as_ref().unwrap().int("n").unwrap();
                    let target = tx.layer(&to)?.features().next().cloned();
                    let Some(mut t) = target else { return Ok(()) };
                    let next = if conditional { n.min(3) } else { n + 1 };
                    if conditional && t.int("n") == Some(next) {
                        return Ok(());
                    }
                    t.set("n", next);
                    tx.update(&to, t)
                }),
            )
            .unwrap();
        store
            .register_trigger(TriggerSpec::new(&name, from, Timing::After, &[Update], &name))
            .unwrap();
    }
    for layer in ["ping", "pong"] {
        store
            .apply(ChangeSet::new(Origin::System).with(ChangeRecord::insert(layer, Feature::default().with("n", 0))))
            .unwrap();
    }
}

#[test]
fn cyclic_trigger_pair_aborts_at_depth_limit() {
    let mut store = Store::new(Config::default());
    ping_pong(&mut store, false);
    let before = store.clone();
    let err = commit(&mut store, ChangeRecord::update("ping", 1, Feature::default().with("n", 1))).unwrap_err();
    assert_eq!(err, EngineError::CyclicTrigger { limit: 16 });
    assert!(store.same_state(&before));
}

#[test]
fn depth_limit_is_configurable() {
    let mut store = Store::new(Config {
        trigger_depth_limit: 4,
        ..Config::default()
    });
    ping_pong(&mut store, false);
    let err = commit(&mut store, ChangeRecord::update("ping", 1, Feature::default().with("n", 1))).unwrap_err();
    assert_eq!(err, EngineError::CyclicTrigger { limit: 4 });
}

#[test]
fn conditional_cascade_reaches_fixpoint() {
    let mut store = Store::new(Config::default());
    ping_pong(&mut store, true);
    let cs = commit(&mut store, ChangeRecord::update("ping", 1, Feature::default().with("n", 2))).unwrap();
    // ping=2 -> pong=2 -> ping unchanged: fixpoint in two steps.
    assert_eq!(cs.len(), 2);
    assert!(cs.records.iter().all(|r| r.depth <= 16));
    assert_eq!(store.get("pong", 1).unwrap().unwrap().int("n"), Some(2));
}

struct ViewFixture {
    store: Store,
    calls: Arc<AtomicUsize>,
}

/// A controller layer edited through a view whose update handler scales the
/// submitted value by ten before writing it to the base.
fn view_fixture() -> ViewFixture {
    let mut store = Store::new(Config::default());
    store
        .create_layer(
            Schema::new("controller", GeometryKind::Point)
                .attr("value", AttrType::Real)
                .nullable("note", AttrType::Text)
                .generated(),
        )
        .unwrap();
    let calls = Arc::new(AtomicUsize::new(0));
    let c = calls.clone();
    store
        .register_handler(
            "interpret",
            Handler::view(move |tx, rec| {
                c.fetch_add(1, Ordering::SeqCst);
                let mut base = tx.get("controller", rec.id.unwrap()).unwrap().clone();
                base.set("value", rec.new.as_ref().unwrap().real("value").unwrap() * 10.0);
                base.geometry = rec.new.as_ref().unwrap().geometry.clone();
                tx.update("controller", base)?;
                Ok(rec.id)
            }),
        )
        .unwrap();
    store
        .register_view(
            ProxyView::new("ctl", "controller")
                .columns(&["value"])
                .on(Update, "interpret")
                .refuse(Delete, "controllers cannot be deleted; reset them instead"),
        )
        .unwrap();
    store
        .apply(ChangeSet::new(Origin::System).with(ChangeRecord::insert(
            "controller",
            Feature::point(Point::new(0.0, 0.0)).with("value", 1.0).with("note", "seed"),
        )))
        .unwrap();
    ViewFixture { store, calls }
}

#[test]
fn view_reads_reflect_base_and_projection() {
    let mut fx = view_fixture();
    let f = fx.store.get("ctl", 1).unwrap().unwrap();
    assert_eq!(f.attributes.keys().collect::<Vec<_>>(), vec!["value"]);
    fx.store
        .apply(ChangeSet::new(Origin::System).with(ChangeRecord::update(
            "controller",
            1,
            Feature::point(Point::new(1.0, 1.0)).with("value", 7.0),
        )))
        .unwrap();
    assert_eq!(fx.store.read("ctl").unwrap()[0].real("value"), Some(7.0));
    assert_eq!(fx.calls.load(Ordering::SeqCst), 0);
}

#[test]
fn user_view_edit_runs_handler_once() {
    let mut fx = view_fixture();
    let cs = commit(
        &mut fx.store,
        ChangeRecord::update("ctl", 1, Feature::point(Point::new(2.0, 0.0)).with("value", 3.0)),
    )
    .unwrap();
    assert_eq!(fx.calls.load(Ordering::SeqCst), 1);
    let base = fx.store.get("controller", 1).unwrap().unwrap();
    assert_eq!(base.real("value"), Some(30.0));
    assert_eq!(base.text("note"), Some("seed"));
    // View record first, then the system write to the base.
    assert_eq!(cs.records.len(), 2);
    assert_eq!(cs.records[0].layer, "ctl");
    assert!(cs.records[0].origin.is_user());
    assert_eq!(cs.records[1].layer, "controller");
    assert_eq!(cs.records[1].origin, Origin::System);
}

#[test]
fn system_writes_through_view_are_not_interpreted() {
    let mut fx = view_fixture();
    for v in 0..5 {
        fx.store
            .apply(ChangeSet::new(Origin::System).with(ChangeRecord::update(
                "ctl",
                1,
                Feature::point(Point::new(v as f64, 0.0)).with("value", v as f64),
            )))
            .unwrap();
    }
    assert_eq!(fx.calls.load(Ordering::SeqCst), 0);
    let base = fx.store.get("controller", 1).unwrap().unwrap();
    assert_eq!(base.real("value"), Some(4.0));
    // Columns hidden by the view survive pass-through writes.
    assert_eq!(base.text("note"), Some("seed"));
}

#[test]
fn disabled_events_and_direct_edits_are_explicit_errors() {
    let mut fx = view_fixture();
    match commit(&mut fx.store, ChangeRecord::delete("ctl", 1)) {
        Err(EngineError::Unsupported(m)) => assert!(m.contains("cannot be deleted")),
        other => panic!("{other:?}"),
    }
    match commit(&mut fx.store, ChangeRecord::insert("ctl", Feature::point(Point::new(0.0, 0.0)))) {
        Err(EngineError::Unsupported(m)) => assert!(m.contains("insert")),
        other => panic!("{other:?}"),
    }
    match commit(&mut fx.store, ChangeRecord::delete("controller", 1)) {
        Err(EngineError::Unsupported(m)) => assert!(m.contains("through its view")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn view_registration_checks_handlers() {
    let mut fx = view_fixture();
    let err = fx
        .store
        .register_view(ProxyView::new("ctl2", "controller").on(Delete, "missing"))
        .unwrap_err();
    assert!(matches!(err, EngineError::Misconfigured(_)));
    let err = fx.store.register_view(ProxyView::new("ctl3", "nowhere")).unwrap_err();
    assert!(matches!(err, EngineError::NotFound(_)));
    let err = fx
        .store
        .register_trigger(TriggerSpec::new("t", "controller", Timing::After, &[Insert], "interpret"))
        .unwrap_err();
    assert!(matches!(err, EngineError::Misconfigured(_)));
    fx.store
        .register_handler("noop", Handler::row(|_, _| Ok(())))
        .unwrap();
    fx.store
        .register_trigger(TriggerSpec::new("t", "controller", Timing::After, &[Insert], "noop"))
        .unwrap();
    let err = fx
        .store
        .register_trigger(TriggerSpec::new("t", "controller", Timing::After, &[Insert], "noop"))
        .unwrap_err();
    assert!(matches!(err, EngineError::Conflict(_)));
}

#[test]
fn triggers_run_in_priority_order() {
    let mut store = Store::new(Config::default());
    store
        .create_layer(Schema::new("t", GeometryKind::None).attr("log", AttrType::Text))
        .unwrap();
    for (name, p) in [("c", 5), ("a", 10), ("b", -1)] {
        store
            .register_handler(
                name,
                Handler::row(move |_, rec| {
                    let f = rec.new.as_mut().unwrap();
                    let log = format!("{}{name}", f.text("log").unwrap());
                    f.set("log", log);
                    Ok(())
                }),
            )
            .unwrap();
        store
            .register_trigger(TriggerSpec::new(name, "t", Timing::Before, &[Insert], name).priority(p))
            .unwrap();
    }
    commit(&mut store, ChangeRecord::insert("t", Feature::default().with("log", ""))).unwrap();
    assert_eq!(store.get("t", 1).unwrap().unwrap().text("log"), Some("bca"));
}

#[test]
fn replay_on_snapshot_is_deterministic() {
    let mut a = angle_store();
    let mut b = a.clone();
    let cs = ChangeSet::new(user())
        .with(ChangeRecord::insert("heading", Feature::default().with("deg", 30.0).with("rad", 0.0)))
        .with(ChangeRecord::insert("heading", Feature::default().with("deg", 0.0).with("rad", 1.0)));
    let ca = a.apply(cs.clone()).unwrap();
    let cb = b.apply(cs).unwrap();
    assert_eq!(ca, cb);
    assert!(a.same_state(&b));
}

// Override binding oracle.

fn binding_store() -> Store {
    let mut store = Store::new(Config::default());
    store
        .create_layer(
            Schema::new("lane", GeometryKind::Polyline)
                .attr("edge_id", AttrType::Integer)
                .attr("lane_index", AttrType::Integer)
                .attr("direction", AttrType::Text)
                .generated(),
        )
        .unwrap();
    store
        .create_layer(
            Schema::new("lane_override", GeometryKind::Polyline)
                .optional_geometry()
                .attr("edge_id", AttrType::Integer)
                .attr("lane_index", AttrType::Integer)
                .nullable("direction", AttrType::Text)
                .generated(),
        )
        .unwrap();
    store
        .register_binding(OverrideBinding::new(
            "lane_merged",
            "lane",
            "lane_override",
            &["edge_id", "lane_index"],
            &["direction", "geometry"],
        ))
        .unwrap();
    store
}

fn line(y: f64) -> Polyline {
    Polyline::from_xy(&[(0.0, y), (10.0, y)]).unwrap()
}

/// Brute-force left join with column-wise first-non-null.
fn oracle(auto: &[Feature], over: &[Feature]) -> Vec<Feature> {
    auto.iter()
        .map(|a| {
            let m = over.iter().find(|o| {
                o.get("edge_id") == a.get("edge_id") && o.get("lane_index") == a.get("lane_index")
            });
            let mut out = a.clone();
            if let Some(o) = m {
                if !o.get("direction").is_null() {
                    out.set("direction", o.get("direction").clone());
                }
                if o.geometry.is_some() {
                    out.geometry = o.geometry.clone();
                }
            }
            out
        })
        .collect()
}

#[test]
fn merged_view_examples() {
    let mut store = binding_store();
    let auto = Feature::polyline(line(0.0))
        .with("edge_id", 7)
        .with("lane_index", 0)
        .with("direction", "forward");
    store
        .apply(ChangeSet::new(Origin::System).with(ChangeRecord::insert("lane", auto.clone())))
        .unwrap();
    assert_eq!(store.read("lane_merged").unwrap(), store.read("lane").unwrap());
    store
        .apply(ChangeSet::new(Origin::System).with(ChangeRecord::insert(
            "lane_override",
            Feature::new(None).with("edge_id", 7).with("lane_index", 0).with("direction", "backward"),
        )))
        .unwrap();
    let merged = store.read("lane_merged").unwrap();
    assert_eq!(merged[0].text("direction"), Some("backward"));
    assert_eq!(merged[0].geometry, auto.geometry);
    store
        .apply(ChangeSet::new(Origin::System).with(ChangeRecord::delete("lane_override", 1)))
        .unwrap();
    assert_eq!(store.read("lane_merged").unwrap(), store.read("lane").unwrap());
}

#[test]
fn binding_key_columns_must_exist() {
    let mut store = binding_store();
    let err = store
        .register_binding(OverrideBinding::new("bad", "lane", "lane_override", &["nope"], &["direction"]))
        .unwrap_err();
    assert!(matches!(err, EngineError::Misconfigured(_)));
}

#[derive(Debug, Clone)]
enum Op {
    Upsert { edge: i64, lane: i64, dir: Option<bool>, geom: Option<u8> },
    Remove { edge: i64, lane: i64 },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (1i64..4, 0i64..3, prop::option::of(any::<bool>()), prop::option::of(0u8..5))
            .prop_map(|(edge, lane, dir, geom)| Op::Upsert { edge, lane, dir, geom }),
        (1i64..4, 0i64..3).prop_map(|(edge, lane)| Op::Remove { edge, lane }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn merged_view_matches_join_oracle(ops in prop::collection::vec(op(), 0..40)) {
        let mut store = binding_store();
        let mut cs = ChangeSet::new(Origin::System);
        for e in 1..4i64 {
            for i in 0..3i64 {
                cs.push(ChangeRecord::insert("lane", Feature::polyline(line(e as f64 + i as f64 / 10.0))
                    .with("edge_id", e).with("lane_index", i).with("direction", "forward")));
            }
        }
        store.apply(cs).unwrap();
        let defaults = store.read("lane_merged").unwrap();
        for op in ops {
            let existing: BTreeMap<(i64, i64), u64> = store.read("lane_override").unwrap().iter()
                .map(|f| ((f.int("edge_id").unwrap(), f.int("lane_index").unwrap()), f.id)).collect();
            let rec = match op {
                Op::Upsert { edge, lane, dir, geom } => {
                    let f = Feature::new(geom.map(|g| streetbase_core::store::Geometry::Polyline(line(100.0 + g as f64))))
                        .with("edge_id", edge).with("lane_index", lane)
                        .with("direction", dir.map(|d| if d { "backward" } else { "forward" }));
                    match existing.get(&(edge, lane)) {
                        Some(id) => ChangeRecord::update("lane_override", *id, f),
                        None => ChangeRecord::insert("lane_override", f),
                    }
                }
                Op::Remove { edge, lane } => match existing.get(&(edge, lane)) {
                    Some(id) => ChangeRecord::delete("lane_override", *id),
                    None => continue,
                },
            };
            store.apply(ChangeSet::new(Origin::System).with(rec)).unwrap();
            let merged = store.read("lane_merged").unwrap();
            let expected = oracle(&store.read("lane").unwrap(), &store.read("lane_override").unwrap());
            prop_assert_eq!(merged.len(), 9);
            prop_assert_eq!(merged, expected);
        }
        let ids: Vec<u64> = store.read("lane_override").unwrap().iter().map(|f| f.id).collect();
        let mut cs = ChangeSet::new(Origin::System);
        for id in ids {
            cs.push(ChangeRecord::delete("lane_override", id));
        }
        store.apply(cs).unwrap();
        prop_assert_eq!(store.read("lane_merged").unwrap(), defaults);
    }
}
