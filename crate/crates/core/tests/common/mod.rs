#![allow(dead_code)]

use streetbase_core::model::{self, names::*};
use streetbase_core::store::{ChangeRecord, ChangeSet, Feature, FeatureId, Origin, Store};
use streetbase_core::{Config, EngineError};
use streetbase_geom::{Point, Polyline};

pub fn store() -> Store {
    store_with(Config::default())
}

pub fn store_with(cfg: Config) -> Store {
    let mut s = Store::new(cfg);
    model::install(&mut s).unwrap();
    s
}

pub fn by_user(store: &mut Store, rec: ChangeRecord) -> Result<ChangeSet, EngineError> {
    store.apply(ChangeSet::new(Origin::user("tester")).with(rec))
}

pub fn node(store: &mut Store, x: f64, y: f64) -> FeatureId {
    let cs = by_user(store, ChangeRecord::insert(EDIT_NODE, Feature::point(Point::new(x, y)))).unwrap();
    cs.inserted_id(EDIT_NODE).unwrap()
}

pub fn line(coords: &[(f64, f64)]) -> Polyline {
    Polyline::from_xy(coords).unwrap()
}

pub fn edge(store: &mut Store, coords: &[(f64, f64)]) -> FeatureId {
    let cs = by_user(store, ChangeRecord::insert(EDIT_EDGE, Feature::polyline(line(coords)))).unwrap();
    cs.inserted_id(EDIT_EDGE).unwrap()
}

pub fn edge_with(store: &mut Store, coords: &[(f64, f64)], width: f64, lanes: i64) -> FeatureId {
    let f = Feature::polyline(line(coords)).with("width", width).with("lane_count", lanes);
    let cs = by_user(store, ChangeRecord::insert(EDIT_EDGE, f)).unwrap();
    cs.inserted_id(EDIT_EDGE).unwrap()
}

/// Nodes at every end of the given polylines, then the axes.
pub fn network(store: &mut Store, lines: &[&[(f64, f64)]]) -> Vec<FeatureId> {
    for l in lines {
        for p in [l[0], l[l.len() - 1]] {
            let exists = store
                .read(ROAD_NODE)
                .unwrap()
                .iter()
                .any(|n| n.point_geometry().unwrap().distance(&Point::new(p.0, p.1)) < 1e-9);
            if !exists {
                node(store, p.0, p.1);
            }
        }
    }
    lines.iter().map(|l| edge(store, l)).collect()
}

pub fn rows(store: &Store, layer: &str) -> Vec<Feature> {
    store.read(layer).unwrap()
}

pub fn rows_with(store: &Store, layer: &str, column: &str, id: FeatureId) -> Vec<Feature> {
    rows(store, layer).into_iter().filter(|f| f.fid(column) == Some(id)).collect()
}

pub fn node_at(store: &Store, x: f64, y: f64) -> FeatureId {
    rows(store, ROAD_NODE)
        .into_iter()
        .find(|n| n.point_geometry().unwrap().distance(&Point::new(x, y)) < 1e-6)
        .expect("node at position")
        .id
}

pub fn limit_row(store: &Store, node: FeatureId, edge: FeatureId) -> Feature {
    rows(store, INTERSECTION_LIMIT)
        .into_iter()
        .find(|f| f.fid("node_id") == Some(node) && f.fid("edge_id") == Some(edge))
        .expect("limit row")
}

pub fn update_view(store: &mut Store, view: &str, f: Feature) -> Result<ChangeSet, EngineError> {
    let id = f.id;
    by_user(store, ChangeRecord::update(view, id, f))
}

/// A grid of `nx` by `ny` nodes, `step` metres apart, joined by straight axes.
pub fn grid(store: &mut Store, nx: usize, ny: usize, step: f64) -> Vec<FeatureId> {
    for j in 0..ny {
        for i in 0..nx {
            node(store, i as f64 * step, j as f64 * step);
        }
    }
    let mut ids = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = (i as f64 * step, j as f64 * step);
            if i + 1 < nx {
                ids.push(edge(store, &[(x, y), (x + step, y)]));
            }
            if j + 1 < ny {
                ids.push(edge(store, &[(x, y), (x, y + step)]));
            }
        }
    }
    ids
}
