//! Polylines and linear referencing.
//!
//! A position along a polyline is a curvilinear abscissa `s` (arc length
//! from the first vertex) plus a signed lateral offset `d`, positive on the
//! left of the direction of travel.

use crate::error::GeomError;
use crate::point::{Point, Vec2};
use crate::polygon::Rect;
use crate::segment::{closest_param, line_intersection, segment_intersection};
use crate::Result;

/// Outer offset joins longer than this multiple of the offset are beveled.
pub const MITER_LIMIT: f64 = 4.0;

/// Exact-vertex tolerance when deciding whether an abscissa sits on a vertex.
const VERTEX_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<Point>,
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Curvilinear abscissa of the nearest point, clamped to `[0, length]`.
    pub s: f64,
    /// Signed offset along the left normal of the tangent at `s`.
    pub d: f64,
    /// Index of the segment holding the nearest point.
    pub segment: usize,
    /// The nearest point itself.
    pub foot: Point,
    /// Euclidean distance from the projected point to `foot`.
    pub distance: f64,
}

/// Free-function form of [`Polyline::project`].
pub fn project_to_polyline(p: &Point, line: &Polyline) -> Projection {
    line.project(p)
}

impl Polyline {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(GeomError::invalid("polyline needs at least two vertices"));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(GeomError::invalid(format!("non-finite vertex {p:?}")));
        }
        if let Some(i) = vertices.windows(2).position(|w| w[0].same_xy(&w[1])) {
            return Err(GeomError::invalid(format!(
                "consecutive vertices {i} and {} coincide",
                i + 1
            )));
        }
        Ok(Polyline { vertices })
    }

    pub fn from_xy(coords: &[(f64, f64)]) -> Result<Self> {
        Polyline::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    /// Builds a polyline after dropping consecutive duplicates.
    pub fn new_dedup(mut vertices: Vec<Point>) -> Result<Self> {
        vertices.dedup_by(|a, b| a.same_xy(b));
        Polyline::new(vertices)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point> {
        self.vertices
    }

    pub fn first(&self) -> Point {
        self.vertices[0]
    }

    pub fn last(&self) -> Point {
        self.vertices[self.vertices.len() - 1]
    }

    pub fn segment_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn segment(&self, i: usize) -> (Point, Point) {
        (self.vertices[i], self.vertices[i + 1])
    }

    fn direction(&self, i: usize) -> Vec2 {
        let (a, b) = self.segment(i);
        (b - a).normalized()
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }

    /// Abscissa of every vertex; first entry 0, last entry the length.
    pub fn cumulative_lengths(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.vertices.len());
        out.push(0.0);
        for w in self.vertices.windows(2) {
            acc += w[0].distance(&w[1]);
            out.push(acc);
        }
        out
    }

    pub fn reversed(&self) -> Polyline {
        let mut v = self.vertices.clone();
        v.reverse();
        Polyline { vertices: v }
    }

    pub fn translated(&self, v: Vec2) -> Polyline {
        Polyline {
            vertices: self.vertices.iter().map(|p| *p + v).collect(),
        }
    }

    pub fn bbox(&self) -> Rect {
        Rect::from_points(self.vertices.iter())
    }

    /// Nearest point on the polyline, ties going to the smallest abscissa.
    pub fn project(&self, p: &Point) -> Projection {
        let cum = self.cumulative_lengths();
        let mut best: Option<(f64, usize, f64)> = None;
        for i in 0..self.segment_count() {
            let (a, b) = self.segment(i);
            let t = closest_param(a, b, *p);
            let dist = p.distance(&a.lerp(&b, t));
            if best.is_none_or(|(bd, _, _)| dist < bd - 1e-12) {
                best = Some((dist, i, t));
            }
        }
        let (distance, segment, t) = best.expect("polyline has segments");
        let (a, b) = self.segment(segment);
        let s = cum[segment] + t * (cum[segment + 1] - cum[segment]);
        let foot = a.lerp(&b, t);
        let tangent = self.tangent_vec(s, &cum);
        Projection {
            s,
            d: tangent.cross(*p - foot),
            segment,
            foot,
            distance,
        }
    }

    /// Euclidean distance from `p` to the polyline.
    pub fn distance_to(&self, p: &Point) -> f64 {
        self.project(p).distance
    }

    fn locate(&self, s: f64, cum: &[f64]) -> (usize, f64) {
        let n = self.segment_count();
        let i = match cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        };
        let seg_len = cum[i + 1] - cum[i];
        ((i), ((s - cum[i]) / seg_len).clamp(0.0, 1.0))
    }

    fn tangent_vec(&self, s: f64, cum: &[f64]) -> Vec2 {
        let last = cum.len() - 1;
        for (j, &c) in cum.iter().enumerate().take(last).skip(1) {
            if (s - c).abs() <= VERTEX_EPS {
                let bis = self.direction(j - 1) + self.direction(j);
                if bis.norm() > 1e-12 {
                    return bis.normalized();
                }
                return self.direction(j);
            }
        }
        let (i, _) = self.locate(s, cum);
        self.direction(i)
    }

    fn check_abscissa(&self, s: f64, len: f64) -> Result<f64> {
        let slack = 1e-9 * len.max(1.0);
        if !(s >= -slack && s <= len + slack) {
            return Err(GeomError::OutOfRange {
                what: "abscissa",
                value: s,
                min: 0.0,
                max: len,
            });
        }
        Ok(s.clamp(0.0, len))
    }

    /// Point at abscissa `s` displaced `d` along the left normal, and the
    /// tangent direction (radians) there. At an interior vertex the tangent
    /// is the bisector of the two adjoining segments.
    pub fn point_at(&self, s: f64, d: f64) -> Result<(Point, f64)> {
        let cum = self.cumulative_lengths();
        let s = self.check_abscissa(s, cum[cum.len() - 1])?;
        let (i, t) = self.locate(s, &cum);
        let (a, b) = self.segment(i);
        let base = a.lerp(&b, t);
        let tangent = self.tangent_vec(s, &cum);
        Ok((base + tangent.left_normal() * d, tangent.angle()))
    }

    pub fn tangent_at(&self, s: f64) -> Result<f64> {
        self.point_at(s, 0.0).map(|(_, t)| t)
    }

    /// The part of the polyline between abscissas `s0 < s1`.
    pub fn sub_polyline(&self, s0: f64, s1: f64) -> Result<Polyline> {
        let cum = self.cumulative_lengths();
        let len = cum[cum.len() - 1];
        let s0 = self.check_abscissa(s0, len)?;
        let s1 = self.check_abscissa(s1, len)?;
        if s1 - s0 <= 0.0 {
            return Err(GeomError::invalid(format!(
                "empty sub-polyline [{s0}, {s1}]"
            )));
        }
        let (i0, t0) = self.locate(s0, &cum);
        let (i1, t1) = self.locate(s1, &cum);
        let mut out = vec![self.vertices[i0].lerp(&self.vertices[i0 + 1], t0)];
        for (j, &c) in cum.iter().enumerate().take(i1 + 1).skip(i0 + 1) {
            if c > s0 + VERTEX_EPS && c < s1 - VERTEX_EPS {
                out.push(self.vertices[j]);
            }
        }
        out.push(self.vertices[i1].lerp(&self.vertices[i1 + 1], t1));
        Polyline::new_dedup(out)
    }

    /// Parallel curve at signed distance `d` (positive = left).
    ///
    /// Inner corners are joined at the intersection of the offset segments.
    /// Outer corners are mitered unless the miter reaches past
    /// [`MITER_LIMIT`]·|d|, in which case they are beveled.
    pub fn offset(&self, d: f64) -> Result<Polyline> {
        if d == 0.0 {
            return Ok(self.clone());
        }
        let n = self.segment_count();
        let dirs: Vec<Vec2> = (0..n).map(|i| self.direction(i)).collect();
        let shift = |i: usize| dirs[i].left_normal() * d;
        // For each source segment: offset start and end as joined.
        let mut starts = vec![self.vertices[0] + shift(0)];
        let mut ends = Vec::with_capacity(n);
        let mut out = vec![starts[0]];
        for j in 1..n {
            let v = self.vertices[j];
            let (u0, u1) = (dirs[j - 1], dirs[j]);
            let turn = u0.cross(u1);
            let prev_end = v + shift(j - 1);
            let next_start = v + shift(j);
            if turn.abs() < 1e-12 && u0.dot(u1) > 0.0 {
                out.push(next_start);
                ends.push(next_start);
                starts.push(next_start);
                continue;
            }
            let inner = turn * d > 0.0;
            let miter = line_intersection(prev_end, u0, next_start, u1)
                .map(|(t, _)| prev_end + u0 * t);
            match miter {
                Some(m) if inner || m.distance(&v) <= MITER_LIMIT * d.abs() => {
                    out.push(m);
                    ends.push(m);
                    starts.push(m);
                }
                _ => {
                    out.push(prev_end);
                    out.push(next_start);
                    ends.push(prev_end);
                    starts.push(next_start);
                }
            }
        }
        let last = self.vertices[n] + shift(n - 1);
        ends.push(last);
        out.push(last);
        for i in 0..n {
            if (ends[i] - starts[i]).dot(dirs[i]) <= 1e-12 {
                return Err(GeomError::OffsetDegenerate(d));
            }
        }
        Polyline::new_dedup(out)
    }

    /// All crossings with `other`, as `(point, s_self, s_other)`, sorted by
    /// `s_self`. Collinear overlaps are skipped.
    pub fn intersections(&self, other: &Polyline) -> Vec<(Point, f64, f64)> {
        let ca = self.cumulative_lengths();
        let cb = other.cumulative_lengths();
        let mut hits = Vec::new();
        for i in 0..self.segment_count() {
            let (a0, a1) = self.segment(i);
            for j in 0..other.segment_count() {
                let (b0, b1) = other.segment(j);
                if let Some(h) = segment_intersection(a0, a1, b0, b1) {
                    let sa = ca[i] + h.t_a * (ca[i + 1] - ca[i]);
                    let sb = cb[j] + h.t_b * (cb[j + 1] - cb[j]);
                    hits.push((h.point, sa, sb));
                }
            }
        }
        hits.sort_by(|a, b| a.1.total_cmp(&b.1));
        hits.dedup_by(|a, b| (a.1 - b.1).abs() < 1e-12 && (a.2 - b.2).abs() < 1e-12);
        hits
    }
}
