//! The bundled demo project: a 6 × 5 street grid with a few objects,
//! crossings, an altimetry line, a lens and a work area.

use streetbase_geom::{Point, Polygon, Polyline, Rect};

use crate::auxiliary::{ALTI_LINE, LENS, POINT_CLOUD};
use crate::collab::WORK_AREA;
use crate::config::Config;
use crate::model::names::*;
use crate::store::{ChangeRecord, ChangeSet, Feature, Origin, Store};
use crate::trigger::Result;

pub const COLUMNS: usize = 6;
pub const ROWS: usize = 5;
pub const SPACING_M: f64 = 80.0;
const DEMO_USER: &str = "demo";

fn edit(store: &mut Store, records: Vec<ChangeRecord>) -> Result<ChangeSet> {
    let mut cs = ChangeSet::new(Origin::user(DEMO_USER));
    for r in records {
        cs.push(r);
    }
    store.apply(cs)
}

fn at(i: usize, j: usize) -> Point {
    Point::new(i as f64 * SPACING_M, j as f64 * SPACING_M)
}

pub fn build(config: Config) -> Result<Store> {
    let mut store = Store::new(config);
    crate::install(&mut store)?;

    let nodes = (0..ROWS)
        .flat_map(|j| (0..COLUMNS).map(move |i| ChangeRecord::insert(EDIT_NODE, Feature::point(at(i, j)))))
        .collect();
    edit(&mut store, nodes)?;

    let mut axes = Vec::new();
    for j in 0..ROWS {
        for i in 0..COLUMNS {
            // Main avenue along the middle row, narrow lanes at the top.
            let (width, lanes) = match j {
                2 => (12.0, 4),
                4 => (6.0, 1),
                _ => (8.0, 2),
            };
            if i + 1 < COLUMNS {
                let line = Polyline::new(vec![at(i, j), at(i + 1, j)])?;
                axes.push(edge(line, width, lanes));
            }
            if j + 1 < ROWS {
                let (a, b) = (at(i, j), at(i, j + 1));
                // Gentle bend on every other vertical street.
                let line = if i % 2 == 1 {
                    Polyline::new(vec![a, Point::new(a.x + 6.0, 0.5 * (a.y + b.y)), b])?
                } else {
                    Polyline::new(vec![a, b])?
                };
                axes.push(edge(line, 8.0, 2));
            }
        }
    }
    edit(&mut store, axes)?;

    let mut objects = Vec::new();
    for (k, x) in [20.0, 40.0, 60.0, 100.0, 120.0, 140.0].into_iter().enumerate() {
        let side = if k % 2 == 0 { 1.0 } else { -1.0 };
        let p = Point::new(x, 2.0 * SPACING_M + side * 7.5);
        objects.push(ChangeRecord::insert(
            EDIT_OBJECT,
            Feature::point(p)
                .with("class", if k % 3 == 0 { "lamp" } else { "tree" })
                .with("position_mode", "sidewalk")
                .with("orientation_mode", "relative")
                .with("theta_abs", 0.0),
        ));
    }
    edit(&mut store, objects)?;

    let crossings = [(40.0, 2.0 * SPACING_M, 12.0), (2.0 * SPACING_M + 40.0, SPACING_M, 8.0)]
        .into_iter()
        .map(|(x, y, w)| {
            let half = w / 2.0 + 0.5;
            let ring = vec![
                Point::new(x - 2.0, y - half),
                Point::new(x + 2.0, y - half),
                Point::new(x + 2.0, y + half),
                Point::new(x - 2.0, y + half),
            ];
            Ok(ChangeRecord::insert(EDIT_PEDESTRIAN_CROSSING, Feature::polygon(Polygon::from_open_ring(ring)?)))
        })
        .collect::<Result<Vec<_>>>()?;
    edit(&mut store, crossings)?;

    let profile = Polyline::new(
        [(0.0, 12.0), (40.0, 13.5), (80.0, 12.8), (120.0, 15.2), (160.0, 14.0)]
            .into_iter()
            .map(|(x, z)| Point::with_z(x, 4.0 * SPACING_M + 20.0, z))
            .collect(),
    )?;
    edit(&mut store, vec![ChangeRecord::insert(ALTI_LINE, Feature::polyline(profile))])?;

    let points = (0..16)
        .flat_map(|j| (0..16).map(move |i| (i, j)))
        .map(|(i, j)| {
            let p = Point::with_z(200.0 + i as f64 * 2.5, 100.0 + j as f64 * 2.5, 30.0 + ((i * j) % 7) as f64 * 0.1);
            ChangeRecord::insert(POINT_CLOUD, Feature::point(p).with("pass", ((i + j) % 2) as i64 + 1))
        })
        .collect();
    edit(&mut store, points)?;
    let lens = Rect::new(205.0, 105.0, 230.0, 130.0).to_polygon()?;
    edit(&mut store, vec![ChangeRecord::insert(LENS, Feature::polygon(lens).with("lod", 1))])?;

    let area = Rect::new(0.0, 0.0, 2.0 * SPACING_M, 2.0 * SPACING_M).to_polygon()?;
    edit(&mut store, vec![ChangeRecord::insert(WORK_AREA, Feature::polygon(area).with("size", 25.0))])?;
    Ok(store)
}

fn edge(line: Polyline, width: f64, lanes: i64) -> ChangeRecord {
    ChangeRecord::insert(
        EDIT_EDGE,
        Feature::polyline(line).with("width", width).with("lane_count", lanes),
    )
}
