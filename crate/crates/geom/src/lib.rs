//! Planar geometry kernel.
//!
//! Coordinates are Cartesian metres in a projected plane; an optional `z`
//! rides along on points but every operation here is two-dimensional.
//! Signed offsets follow one convention everywhere: positive is to the
//! left of the direction of travel.

mod angle;
mod arc;
mod bezier;
mod error;
mod fillet;
mod point;
mod polygon;
mod polyline;
mod segment;

pub use angle::{angle_mod_pi, normalize_angle, weighted_orientation_mean};
pub use arc::{Arc, ARC_MAX_STEP};
pub use bezier::{bezier_eval, bezier_polyline};
pub use error::GeomError;
pub use fillet::{fillet_corner, max_feasible_fillet, Fillet};
pub use point::{Point, Vec2};
pub use polygon::{polygon_intersection_area, polygon_intersection_centroid, Polygon, Rect};
pub use polyline::{project_to_polyline, Polyline, Projection, MITER_LIMIT};
pub use segment::{line_intersection, segment_intersection, SegmentHit};

pub type Result<T, E = GeomError> = std::result::Result<T, E>;
