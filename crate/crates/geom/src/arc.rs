use std::f64::consts::{PI, TAU};

use crate::error::GeomError;
use crate::point::{Point, Vec2};
use crate::Result;

/// Largest angular step used when discretizing arcs (10°).
pub const ARC_MAX_STEP: f64 = PI / 18.0;

/// Circular arc swept from `start_angle` to `end_angle`; positive sweep is
/// counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub center: Point,
    pub radius: f64,
    pub start_angle: f64,
    pub end_angle: f64,
}

impl Arc {
    pub fn new(center: Point, radius: f64, start_angle: f64, end_angle: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GeomError::invalid(format!("arc radius {radius} must be positive")));
        }
        let sweep = (end_angle - start_angle).abs();
        if !(sweep > 0.0 && sweep < TAU) {
            return Err(GeomError::invalid(format!("arc sweep {sweep} outside (0, 2π)")));
        }
        Ok(Arc {
            center,
            radius,
            start_angle,
            end_angle,
        })
    }

    pub fn sweep(&self) -> f64 {
        self.end_angle - self.start_angle
    }

    pub fn point_at_angle(&self, a: f64) -> Point {
        self.center.without_z() + Vec2::from_angle(a) * self.radius
    }

    pub fn start(&self) -> Point {
        self.point_at_angle(self.start_angle)
    }

    pub fn end(&self) -> Point {
        self.point_at_angle(self.end_angle)
    }

    /// Vertices from start to end, at most `max_step` radians apart.
    pub fn points(&self, max_step: f64) -> Vec<Point> {
        let n = ((self.sweep().abs() / max_step).ceil() as usize).max(1);
        (0..=n)
            .map(|k| self.point_at_angle(self.start_angle + self.sweep() * k as f64 / n as f64))
            .collect()
    }
}
