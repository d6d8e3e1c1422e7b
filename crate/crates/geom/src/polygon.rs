use geo::{Area, BooleanOps, Centroid};

use crate::error::GeomError;
use crate::point::Point;
use crate::segment::{point_segment_distance, segment_intersection};
use crate::Result;

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Rect {
            min_x: x1.min(x2),
            min_y: y1.min(y2),
            max_x: x1.max(x2),
            max_y: y1.max(y2),
        }
    }

    pub fn from_points<'a>(points: impl Iterator<Item = &'a Point>) -> Self {
        let mut r = Rect {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for p in points {
            r.min_x = r.min_x.min(p.x);
            r.min_y = r.min_y.min(p.y);
            r.max_x = r.max_x.max(p.x);
            r.max_y = r.max_y.max(p.y);
        }
        r
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    /// Closed-interval overlap test.
    pub fn intersects(&self, o: &Rect) -> bool {
        self.min_x <= o.max_x && o.min_x <= self.max_x && self.min_y <= o.max_y && o.min_y <= self.max_y
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn expanded(&self, by: f64) -> Rect {
        Rect {
            min_x: self.min_x - by,
            min_y: self.min_y - by,
            max_x: self.max_x + by,
            max_y: self.max_y + by,
        }
    }

    pub fn union(&self, o: &Rect) -> Rect {
        Rect {
            min_x: self.min_x.min(o.min_x),
            min_y: self.min_y.min(o.min_y),
            max_x: self.max_x.max(o.max_x),
            max_y: self.max_y.max(o.max_y),
        }
    }

    pub fn to_polygon(&self) -> Result<Polygon> {
        Polygon::from_open_ring(vec![
            Point::new(self.min_x, self.min_y),
            Point::new(self.max_x, self.min_y),
            Point::new(self.max_x, self.max_y),
            Point::new(self.min_x, self.max_y),
        ])
    }
}

/// Polygon with closed rings: exterior counter-clockwise, holes clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    exterior: Vec<Point>,
    holes: Vec<Vec<Point>>,
}

fn signed_ring_area(ring: &[Point]) -> f64 {
    ring.windows(2)
        .map(|w| w[0].x * w[1].y - w[1].x * w[0].y)
        .sum::<f64>()
        / 2.0
}

fn check_ring(ring: &[Point], what: &str) -> Result<()> {
    if ring.len() < 4 {
        return Err(GeomError::invalid(format!("{what} ring needs at least 4 points")));
    }
    if !ring[0].same_xy(&ring[ring.len() - 1]) {
        return Err(GeomError::invalid(format!("{what} ring is not closed")));
    }
    if ring.iter().any(|p| !p.is_finite()) {
        return Err(GeomError::invalid(format!("{what} ring has non-finite coordinates")));
    }
    if signed_ring_area(ring).abs() <= 0.0 {
        return Err(GeomError::invalid(format!("{what} ring has zero area")));
    }
    Ok(())
}

fn ring_contains(ring: &[Point], p: &Point) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn ring_is_simple(ring: &[Point]) -> bool {
    let n = ring.len() - 1;
    for i in 0..n {
        for j in i + 1..n {
            // Adjacent edges share a vertex by construction.
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segment_intersection(ring[i], ring[i + 1], ring[j], ring[j + 1]).is_some() {
                return false;
            }
        }
    }
    true
}

impl Polygon {
    /// Builds a polygon from closed rings, normalizing ring orientation.
    pub fn new(mut exterior: Vec<Point>, mut holes: Vec<Vec<Point>>) -> Result<Self> {
        check_ring(&exterior, "exterior")?;
        if signed_ring_area(&exterior) < 0.0 {
            exterior.reverse();
        }
        for h in &mut holes {
            check_ring(h, "hole")?;
            if signed_ring_area(h) > 0.0 {
                h.reverse();
            }
        }
        Ok(Polygon { exterior, holes })
    }

    /// Builds a hole-free polygon from an unclosed vertex list.
    pub fn from_open_ring(mut ring: Vec<Point>) -> Result<Self> {
        ring.dedup_by(|a, b| a.same_xy(b));
        if ring.len() > 1 && ring[0].same_xy(&ring[ring.len() - 1]) {
            ring.pop();
        }
        if let Some(first) = ring.first().copied() {
            ring.push(first);
        }
        Polygon::new(ring, Vec::new())
    }

    pub fn exterior(&self) -> &[Point] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<Point>] {
        &self.holes
    }

    /// Exterior vertices without the closing repeat.
    pub fn exterior_vertices(&self) -> &[Point] {
        &self.exterior[..self.exterior.len() - 1]
    }

    pub fn area(&self) -> f64 {
        signed_ring_area(&self.exterior) - self.holes.iter().map(|h| -signed_ring_area(h)).sum::<f64>()
    }

    pub fn bbox(&self) -> Rect {
        Rect::from_points(self.exterior.iter())
    }

    /// Area centroid of the exterior ring.
    pub fn centroid(&self) -> Point {
        let ring = &self.exterior;
        let a = signed_ring_area(ring);
        let (mut cx, mut cy) = (0.0, 0.0);
        for w in ring.windows(2) {
            let f = w[0].x * w[1].y - w[1].x * w[0].y;
            cx += (w[0].x + w[1].x) * f;
            cy += (w[0].y + w[1].y) * f;
        }
        Point::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// Even-odd containment; points on the boundary may fall either way.
    pub fn contains_point(&self, p: &Point) -> bool {
        ring_contains(&self.exterior, p) && !self.holes.iter().any(|h| ring_contains(h, p))
    }

    /// Distance from `p` to the nearest ring edge.
    pub fn boundary_distance(&self, p: &Point) -> f64 {
        std::iter::once(&self.exterior)
            .chain(self.holes.iter())
            .flat_map(|r| r.windows(2))
            .map(|w| point_segment_distance(*p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when no ring self-intersects.
    pub fn is_simple(&self) -> bool {
        ring_is_simple(&self.exterior) && self.holes.iter().all(|h| ring_is_simple(h))
    }

    /// Convex when every exterior turn has the same sign.
    pub fn is_convex(&self) -> bool {
        let v = self.exterior_vertices();
        let n = v.len();
        (0..n).all(|i| {
            let a = v[i];
            let b = v[(i + 1) % n];
            let c = v[(i + 2) % n];
            (b - a).cross(c - b) >= -1e-12
        })
    }

    pub fn rotate_about(&self, origin: &Point, angle: f64) -> Polygon {
        let rot = |r: &Vec<Point>| r.iter().map(|p| p.rotate_about(origin, angle)).collect();
        Polygon {
            exterior: rot(&self.exterior),
            holes: self.holes.iter().map(rot).collect(),
        }
    }

    pub fn translated(&self, v: crate::Vec2) -> Polygon {
        let tr = |r: &Vec<Point>| r.iter().map(|p| *p + v).collect();
        Polygon {
            exterior: tr(&self.exterior),
            holes: self.holes.iter().map(tr).collect(),
        }
    }

    fn to_geo(&self) -> geo::Polygon<f64> {
        let ring = |r: &Vec<Point>| {
            geo::LineString::from(r.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>())
        };
        geo::Polygon::new(ring(&self.exterior), self.holes.iter().map(ring).collect())
    }
}

/// Clips `subject` against the half-planes of the convex, counter-clockwise
/// ring `clip`. Both rings are open.
fn clip_to_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (c0, c1) = (clip[i], clip[(i + 1) % clip.len()]);
        let side = |p: &Point| (c1 - c0).cross(*p - c0);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (sp, sq) = (side(&p), side(&q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                out.push(p.lerp(&q, sp / (sp - sq)));
            }
        }
    }
    out
}

/// Overlap ring of `a` and `b` when one of them is convex and neither has
/// holes. `geo` snaps to a grid, which costs about 1e-8 in relative area.
fn convex_overlap(a: &Polygon, b: &Polygon) -> Option<Vec<Point>> {
    if !a.holes.is_empty() || !b.holes.is_empty() {
        return None;
    }
    if b.is_convex() {
        Some(clip_to_convex(a.exterior_vertices(), b.exterior_vertices()))
    } else if a.is_convex() {
        Some(clip_to_convex(b.exterior_vertices(), a.exterior_vertices()))
    } else {
        None
    }
}

fn closed(mut ring: Vec<Point>) -> Vec<Point> {
    if let Some(first) = ring.first().copied() {
        ring.push(first);
    }
    ring
}

/// Area of `a ∩ b` in square metres.
pub fn polygon_intersection_area(a: &Polygon, b: &Polygon) -> f64 {
    if !a.bbox().intersects(&b.bbox()) {
        return 0.0;
    }
    match convex_overlap(a, b) {
        Some(ring) if ring.len() < 3 => 0.0,
        Some(ring) => signed_ring_area(&closed(ring)).max(0.0),
        None => a.to_geo().intersection(&b.to_geo()).unsigned_area(),
    }
}

/// Centroid of `a ∩ b`, or `None` when they do not overlap.
pub fn polygon_intersection_centroid(a: &Polygon, b: &Polygon) -> Option<Point> {
    if !a.bbox().intersects(&b.bbox()) {
        return None;
    }
    if let Some(ring) = convex_overlap(a, b) {
        let ring = closed(ring);
        if ring.len() < 4 || signed_ring_area(&ring) <= 0.0 {
            return None;
        }
        return Some(Polygon { exterior: ring, holes: Vec::new() }.centroid());
    }
    let inter = a.to_geo().intersection(&b.to_geo());
    if inter.unsigned_area() <= 0.0 {
        return None;
    }
    inter.centroid().map(|c| Point::new(c.x(), c.y()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x: f64, y: f64, size: f64) -> Polygon {
        Rect::new(x, y, x + size, y + size).to_polygon().unwrap()
    }

    #[test]
    fn orientation_is_normalized() {
        let cw = Polygon::from_open_ring(vec![
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(signed_ring_area(cw.exterior()) > 0.0);
        assert_eq!(cw.area(), 1.0);
    }

    #[test]
    fn rejects_open_or_flat_rings() {
        let open = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        assert!(Polygon::new(open, vec![]).is_err());
        let flat = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)];
        assert!(Polygon::from_open_ring(flat).is_err());
    }

    #[test]
    fn intersection_area_examples() {
        let unit = square(0.0, 0.0, 1.0);
        assert!((polygon_intersection_area(&unit, &unit) - 1.0).abs() < 1e-12);
        assert_eq!(polygon_intersection_area(&unit, &square(5.0, 5.0, 1.0)), 0.0);
        let half = Rect::new(0.5, 0.0, 1.5, 1.0).to_polygon().unwrap();
        assert!((polygon_intersection_area(&unit, &half) - 0.5).abs() < 1e-12);
        // A small rectangle inside a large one overlaps by its own area.
        let big = Rect::new(-4.349085293406441, 2.8181545169490616, 1.43, 6.52).to_polygon().unwrap();
        let small = Rect::new(-0.29597277494959723, 3.5801126065999886, 0.5624327625409444, 3.898813133611373)
            .to_polygon()
            .unwrap();
        assert!((polygon_intersection_area(&big, &small) - small.area()).abs() < 1e-15);
    }

    #[test]
    fn holes_reduce_area_and_containment() {
        let ext = square(0.0, 0.0, 4.0).exterior().to_vec();
        let hole = square(1.0, 1.0, 2.0).exterior().to_vec();
        let p = Polygon::new(ext, vec![hole]).unwrap();
        assert_eq!(p.area(), 12.0);
        assert!(!p.contains_point(&Point::new(2.0, 2.0)));
        assert!(p.contains_point(&Point::new(0.5, 0.5)));
    }

    #[test]
    fn simplicity_and_convexity() {
        let bowtie = Polygon::from_open_ring(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(2.0, 0.0),
            Point::new(0.0, 2.0),
        ]);
        // A bowtie has zero signed area and is rejected outright.
        assert!(bowtie.is_err());
        let notch = Polygon::from_open_ring(vec![
            Point::new(0.0, 0.0),
            Point::new(4.0, 0.0),
            Point::new(4.0, 4.0),
            Point::new(2.0, 1.0),
            Point::new(0.0, 4.0),
        ])
        .unwrap();
        assert!(notch.is_simple());
        assert!(!notch.is_convex());
        assert!(square(0.0, 0.0, 1.0).is_convex());
    }

    #[test]
    fn centroid_of_rectangle() {
        let r = Rect::new(0.0, 0.0, 4.0, 2.0).to_polygon().unwrap();
        let c = r.centroid();
        assert!((c.x - 2.0).abs() < 1e-12 && (c.y - 1.0).abs() < 1e-12);
    }
}
