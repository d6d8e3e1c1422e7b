//! The interactive street model: axis network, generated surfaces, lanes,
//! interconnections, street objects and their controllers.

pub mod check;
pub mod controllers;
pub mod layout;
pub mod names;
pub mod network;
pub mod objects;
pub mod regen;
pub mod topology;
pub mod traffic;

use crate::store::{AttrType, ChangeKind, GeometryKind, Schema, Store};
use crate::trigger::{Handler, OverrideBinding, ProxyView, Result, Timing, TriggerSpec};

use names::*;
use traffic::{INTERCONNECTION_KEYS, LANE_KEYS};

pub use network::{Edge, Network, Node};
pub use regen::{plan_mismatches, regenerate, Dirty};

const ALL: [ChangeKind; 3] = [ChangeKind::Insert, ChangeKind::Update, ChangeKind::Delete];

pub fn lane_binding() -> OverrideBinding {
    OverrideBinding::new(LANE_MERGED, LANE, LANE_OVERRIDE, &LANE_KEYS, &["direction", "geometry"])
}

pub fn interconnection_binding() -> OverrideBinding {
    OverrideBinding::new(
        INTERCONNECTION_MERGED,
        INTERCONNECTION,
        INTERCONNECTION_OVERRIDE,
        &INTERCONNECTION_KEYS,
        &["allowed", "controls", "geometry"],
    )
    .gated_by("allowed")
}

pub fn schemas() -> Vec<Schema> {
    use AttrType::*;
    use GeometryKind as G;
    vec![
        Schema::new(ROAD_NODE, G::Point).generated(),
        Schema::new(ROAD_AXIS, G::Polyline)
            .attr("start_node", Integer)
            .attr("end_node", Integer)
            .attr("width", Real)
            .attr("lane_count", Integer)
            .generated(),
        Schema::new(INTERSECTION_LIMIT, G::Point)
            .attr("node_id", Integer)
            .attr("edge_id", Integer)
            .attr("s", Real)
            .attr("overridden", Boolean)
            .generated(),
        Schema::new(CORNER_RADIUS, G::Point)
            .attr("node_id", Integer)
            .attr("edge_a", Integer)
            .attr("edge_b", Integer)
            .attr("r", Real)
            .nullable("effective_r", Real)
            .attr("overridden", Boolean)
            .attr("clamped", Boolean)
            .generated(),
        Schema::new(WIDTH_PROBE, G::Point).generated(),
        Schema::new(SECTION_SURFACE, G::Polygon)
            .optional_geometry()
            .attr("edge_id", Integer)
            .attr("degenerate", Boolean)
            .generated(),
        Schema::new(INTERSECTION_SURFACE, G::Polygon)
            .attr("node_id", Integer)
            .generated(),
        Schema::new(LANE, G::Polyline)
            .optional_geometry()
            .attr("edge_id", Integer)
            .attr("lane_index", Integer)
            .attr("direction", Text)
            .generated(),
        Schema::new(LANE_OVERRIDE, G::Polyline)
            .optional_geometry()
            .attr("edge_id", Integer)
            .attr("lane_index", Integer)
            .nullable("direction", Text)
            .generated(),
        Schema::new(INTERCONNECTION, G::Polyline)
            .optional_geometry()
            .attr("node_id", Integer)
            .attr("from_edge", Integer)
            .attr("from_lane", Integer)
            .attr("to_edge", Integer)
            .attr("to_lane", Integer)
            .attr("allowed", Boolean)
            .nullable("controls", Text)
            .generated(),
        Schema::new(INTERCONNECTION_OVERRIDE, G::Polyline)
            .optional_geometry()
            .attr("node_id", Integer)
            .attr("from_edge", Integer)
            .attr("from_lane", Integer)
            .attr("to_edge", Integer)
            .attr("to_lane", Integer)
            .nullable("allowed", Boolean)
            .nullable("controls", Text)
            .generated(),
        Schema::new(STREET_OBJECT, G::Point)
            .attr("class", Text)
            .attr("position_mode", Text)
            .nullable("ref_edge", Integer)
            .nullable("s", Real)
            .nullable("d", Real)
            .nullable("side", Integer)
            .attr("orientation_mode", Text)
            .attr("theta_abs", Real)
            .nullable("theta_rel", Real)
            .attr("clamped", Boolean)
            .generated(),
        Schema::new(PEDESTRIAN_CROSSING, G::Polygon)
            .attr("ref_edge", Integer)
            .attr("s", Real)
            .attr("width", Real)
            .attr("orientation", Real)
            .generated(),
    ]
}

fn view_handlers(store: &mut Store) -> Result<()> {
    let handlers: Vec<(&str, Handler)> = vec![
        ("node_insert", Handler::view(topology::node_insert)),
        ("node_update", Handler::view(topology::node_update)),
        ("node_delete", Handler::view(topology::node_delete)),
        ("edge_insert", Handler::view(topology::edge_insert)),
        ("edge_update", Handler::view(topology::edge_update)),
        ("edge_delete", Handler::view(topology::edge_delete)),
        ("limit_update", Handler::view(controllers::limit_update)),
        ("limit_reset", Handler::view(controllers::limit_reset)),
        ("radius_update", Handler::view(controllers::radius_update)),
        ("radius_reset", Handler::view(controllers::radius_reset)),
        ("probe_insert", Handler::view(controllers::probe_insert)),
        ("lane_update", Handler::view(traffic::edit_lane_update)),
        ("lane_delete", Handler::view(traffic::edit_lane_delete)),
        ("interconnection_update", Handler::view(traffic::edit_interconnection_update)),
        ("interconnection_delete", Handler::view(traffic::edit_interconnection_delete)),
        ("object_insert", Handler::view(objects::edit_object_insert)),
        ("object_update", Handler::view(objects::edit_object_update)),
        ("object_delete", Handler::view(objects::edit_object_delete)),
        ("crossing_insert", Handler::view(objects::edit_crossing_insert)),
        ("crossing_update", Handler::view(objects::edit_crossing_update)),
        ("crossing_delete", Handler::view(objects::edit_crossing_delete)),
        ("check_axis", Handler::row(topology::check_axis)),
        ("regenerate_network", Handler::deferred(regen::on_network_change)),
        ("interpret_probes", Handler::deferred(controllers::interpret_probes)),
    ];
    for (name, h) in handlers {
        store.register_handler(name, h)?;
    }
    Ok(())
}

/// Registers the street model on a store.
pub fn install(store: &mut Store) -> Result<()> {
    for s in schemas() {
        store.create_layer(s)?;
    }
    view_handlers(store)?;
    store.register_binding(lane_binding())?;
    store.register_binding(interconnection_binding())?;

    use ChangeKind::*;
    let views = [
        ProxyView::new(EDIT_NODE, ROAD_NODE)
            .on(Insert, "node_insert")
            .on(Update, "node_update")
            .on(Delete, "node_delete"),
        ProxyView::new(EDIT_EDGE, ROAD_AXIS)
            .on(Insert, "edge_insert")
            .on(Update, "edge_update")
            .on(Delete, "edge_delete"),
        ProxyView::new(CTL_INTERSECTION_LIMIT, INTERSECTION_LIMIT)
            .on(Update, "limit_update")
            .on(Delete, "limit_reset")
            .refuse(Insert, "intersection limits exist once per axis end; drag an existing controller"),
        ProxyView::new(CTL_CORNER_RADIUS, CORNER_RADIUS)
            .on(Update, "radius_update")
            .on(Delete, "radius_reset")
            .refuse(Insert, "corner radii exist once per corner; drag an existing controller"),
        ProxyView::new(CTL_WIDTH_PROBE, WIDTH_PROBE)
            .on(Insert, "probe_insert")
            .refuse(Update, "width probes are consumed when inserted")
            .refuse(Delete, "width probes are consumed when inserted"),
        ProxyView::new(EDIT_LANE, LANE_MERGED)
            .on(Update, "lane_update")
            .on(Delete, "lane_delete")
            .refuse(Insert, "lanes come from the lane_count of their road axis; edit it through edit_edge"),
        ProxyView::new(EDIT_INTERCONNECTION, INTERCONNECTION_MERGED)
            .on(Update, "interconnection_update")
            .on(Delete, "interconnection_delete")
            .refuse(Insert, "every possible interconnection already exists; delete toggles it"),
        ProxyView::new(EDIT_OBJECT, STREET_OBJECT)
            .on(Insert, "object_insert")
            .on(Update, "object_update")
            .on(Delete, "object_delete"),
        ProxyView::new(EDIT_PEDESTRIAN_CROSSING, PEDESTRIAN_CROSSING)
            .on(Insert, "crossing_insert")
            .on(Update, "crossing_update")
            .on(Delete, "crossing_delete"),
    ];
    for v in views {
        store.register_view(v)?;
    }

    store.register_trigger(
        TriggerSpec::new("check_axis", ROAD_AXIS, Timing::Before, &[Insert, Update], "check_axis").priority(0),
    )?;
    for layer in [ROAD_NODE, ROAD_AXIS] {
        store.register_trigger(
            TriggerSpec::new("regenerate", layer, Timing::Deferred, &ALL, "regenerate_network").priority(10),
        )?;
    }
    store.register_trigger(
        TriggerSpec::new("interpret", WIDTH_PROBE, Timing::Deferred, &[Insert], "interpret_probes").priority(0),
    )?;
    Ok(())
}

/// Regenerates the whole model; returns the number of changed rows.
pub fn generate(store: &mut Store) -> Result<usize> {
    let (_, cs) = store.transact(|tx| {
        let dirty = Dirty::everything(tx.store());
        regenerate(tx, &dirty)
    })?;
    Ok(cs.records.len())
}
