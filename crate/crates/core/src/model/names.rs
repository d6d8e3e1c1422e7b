//! Layer, view and handler names of the street model.

pub const ROAD_NODE: &str = "road_node";
pub const ROAD_AXIS: &str = "road_axis";
pub const EDIT_NODE: &str = "edit_node";
pub const EDIT_EDGE: &str = "edit_edge";

pub const INTERSECTION_LIMIT: &str = "intersection_limit";
pub const CTL_INTERSECTION_LIMIT: &str = "ctl_intersection_limit";
pub const CORNER_RADIUS: &str = "corner_radius";
pub const CTL_CORNER_RADIUS: &str = "ctl_corner_radius";
pub const WIDTH_PROBE: &str = "width_probe";
pub const CTL_WIDTH_PROBE: &str = "ctl_width_probe";
pub const SECTION_SURFACE: &str = "section_surface";
pub const INTERSECTION_SURFACE: &str = "intersection_surface";

pub const LANE: &str = "lane";
pub const LANE_OVERRIDE: &str = "lane_override";
pub const LANE_MERGED: &str = "lane_merged";
pub const EDIT_LANE: &str = "edit_lane";
pub const INTERCONNECTION: &str = "interconnection";
pub const INTERCONNECTION_OVERRIDE: &str = "interconnection_override";
pub const INTERCONNECTION_MERGED: &str = "interconnection_merged";
pub const EDIT_INTERCONNECTION: &str = "edit_interconnection";

pub const STREET_OBJECT: &str = "street_object";
pub const EDIT_OBJECT: &str = "edit_object";
pub const PEDESTRIAN_CROSSING: &str = "pedestrian_crossing";
pub const EDIT_PEDESTRIAN_CROSSING: &str = "edit_pedestrian_crossing";

/// Layers written by regeneration, in the order they are synchronized.
pub const GENERATED: [&str; 10] = [
    CORNER_RADIUS,
    INTERSECTION_LIMIT,
    SECTION_SURFACE,
    INTERSECTION_SURFACE,
    LANE,
    LANE_OVERRIDE,
    INTERCONNECTION,
    INTERCONNECTION_OVERRIDE,
    STREET_OBJECT,
    PEDESTRIAN_CROSSING,
];
