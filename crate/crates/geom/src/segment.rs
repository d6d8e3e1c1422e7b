use crate::point::{Point, Vec2};

const PARALLEL_EPS: f64 = 1e-12;

/// Crossing of two segments, with the parameter of the hit along each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentHit {
    pub point: Point,
    pub t_a: f64,
    pub t_b: f64,
}

/// Intersection of the infinite lines `p + t·u` and `q + s·v`.
///
/// Returns `(t, s)`, or `None` when the lines are parallel.
pub fn line_intersection(p: Point, u: Vec2, q: Point, v: Vec2) -> Option<(f64, f64)> {
    let denom = u.cross(v);
    if denom.abs() <= PARALLEL_EPS * u.norm() * v.norm() {
        return None;
    }
    let w = q - p;
    Some((w.cross(v) / denom, w.cross(u) / denom))
}

/// Proper or touching intersection of segments `a0a1` and `b0b1`.
///
/// Collinear overlaps are not reported.
pub fn segment_intersection(a0: Point, a1: Point, b0: Point, b1: Point) -> Option<SegmentHit> {
    let u = a1 - a0;
    let v = b1 - b0;
    let (t, s) = line_intersection(a0, u, b0, v)?;
    let eps = 1e-12;
    if (-eps..=1.0 + eps).contains(&t) && (-eps..=1.0 + eps).contains(&s) {
        let t = t.clamp(0.0, 1.0);
        Some(SegmentHit {
            point: a0.lerp(&a1, t),
            t_a: t,
            t_b: s.clamp(0.0, 1.0),
        })
    } else {
        None
    }
}

/// Closest point of segment `ab` to `p` as a parameter in `[0, 1]`.
pub(crate) fn closest_param(a: Point, b: Point, p: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return 0.0;
    }
    ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
}

pub(crate) fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let t = closest_param(a, b, p);
    p.distance(&a.lerp(&b, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_segments() {
        let hit = segment_intersection(
            Point::new(0.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
            Point::new(2.0, 0.0),
        )
        .unwrap();
        assert!((hit.point.x - 1.0).abs() < 1e-12 && (hit.point.y - 1.0).abs() < 1e-12);
        assert!((hit.t_a - 0.5).abs() < 1e-12);
    }

    #[test]
    fn parallel_segments_do_not_intersect() {
        assert!(segment_intersection(
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0)
        )
        .is_none());
    }

    #[test]
    fn disjoint_segments() {
        assert!(segment_intersection(
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, -1.0),
            Point::new(2.0, 1.0)
        )
        .is_none());
    }
}
