//! Per-node layout: intersection limits, corner fillets and surfaces.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use streetbase_geom::{
    line_intersection, max_feasible_fillet, Fillet, Point, Polygon, Polyline, Vec2, ARC_MAX_STEP, MITER_LIMIT,
};

use super::names::{CORNER_RADIUS, INTERSECTION_LIMIT};
use super::network::{outward_angle, Network};
use crate::config::Config;
use crate::store::{FeatureId, Store};

/// Limit used at dead ends, where there is nothing to clear.
pub const DEAD_END_LIMIT: f64 = 1e-6;
/// Limits never reach past this fraction of the edge length.
pub const MAX_LIMIT_FRACTION: f64 = 0.45;

/// Corner key: node, then the edge whose left border starts the corner,
/// then the next edge counter-clockwise.
pub type CornerKey = (FeatureId, FeatureId, FeatureId);

/// Limits and radii the user pinned.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserChoices {
    pub radii: BTreeMap<CornerKey, f64>,
    pub limits: BTreeMap<(FeatureId, FeatureId), f64>,
}

impl UserChoices {
    pub fn load(store: &Store) -> UserChoices {
        let mut out = UserChoices::default();
        if let Ok(layer) = store.layer(CORNER_RADIUS) {
            for f in layer.features().filter(|f| f.flag("overridden") == Some(true)) {
                if let (Some(n), Some(a), Some(b), Some(r)) =
                    (f.fid("node_id"), f.fid("edge_a"), f.fid("edge_b"), f.real("r"))
                {
                    out.radii.insert((n, a, b), r);
                }
            }
        }
        if let Ok(layer) = store.layer(INTERSECTION_LIMIT) {
            for f in layer.features().filter(|f| f.flag("overridden") == Some(true)) {
                if let (Some(n), Some(e), Some(s)) = (f.fid("node_id"), f.fid("edge_id"), f.real("s")) {
                    out.limits.insert((n, e), s);
                }
            }
        }
        out
    }
}

/// An edge seen from one of its nodes.
#[derive(Debug, Clone)]
pub struct Incidence {
    pub edge: FeatureId,
    pub angle: f64,
    pub width: f64,
    pub outward: Polyline,
    pub left: Polyline,
    pub right: Polyline,
}

impl Incidence {
    pub fn length(&self) -> f64 {
        self.outward.length()
    }

    pub fn max_limit(&self) -> f64 {
        MAX_LIMIT_FRACTION * self.length()
    }

    /// Right and left border points of the cap at abscissa `s`.
    pub fn cap(&self, s: f64) -> (Point, Point) {
        (
            cap_point(&self.outward, s, -self.width / 2.0),
            cap_point(&self.outward, s, self.width / 2.0),
        )
    }
}

/// Offset border of an outward axis. Falls back to the first segment when
/// the whole polyline cannot be offset.
pub fn border(outward: &Polyline, d: f64) -> Polyline {
    outward.offset(d).unwrap_or_else(|_| {
        let (a, b) = outward.segment(0);
        Polyline::new(vec![a, b])
            .and_then(|l| l.offset(d))
            .expect("a single segment always offsets")
    })
}

/// Start of the offset of `line` clipped to begin at `s`. Matches the first
/// vertex of sections and lanes built from the same clip.
pub fn cap_point(line: &Polyline, s: f64, d: f64) -> Point {
    let len = line.length();
    match line.sub_polyline(s.clamp(0.0, len), len) {
        Ok(clip) => {
            let (a, b) = clip.segment(0);
            a + (b - a).normalized().left_normal() * d
        }
        Err(_) => {
            let (a, b) = line.segment(line.segment_count() - 1);
            b + (b - a).normalized().left_normal() * d
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CornerShape {
    Fillet(Fillet),
    /// Reflex corner closed at the meeting point of the extended borders.
    Miter(Point),
    /// Straight join between the two border starts.
    Bevel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corner {
    pub edge_a: FeatureId,
    pub edge_b: FeatureId,
    /// Requested radius.
    pub radius: f64,
    pub overridden: bool,
    pub shape: CornerShape,
    /// The requested radius did not fit and was reduced.
    pub clamped: bool,
    /// Position of the radius controller.
    pub controller: Point,
}

impl Corner {
    pub fn effective_radius(&self) -> Option<f64> {
        match &self.shape {
            CornerShape::Fillet(f) => Some(f.radius),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Limit {
    pub edge: FeatureId,
    pub s: f64,
    pub overridden: bool,
}

#[derive(Debug, Clone)]
pub struct NodeLayout {
    pub node: FeatureId,
    pub position: Point,
    pub incidences: Vec<Incidence>,
    pub corners: Vec<Corner>,
    pub limits: Vec<Limit>,
}

impl NodeLayout {
    pub fn limit(&self, edge: FeatureId) -> Option<f64> {
        self.limits.iter().find(|l| l.edge == edge).map(|l| l.s)
    }

    /// Intersection surface; `None` below degree 2 or when the ring is degenerate.
    pub fn surface(&self) -> Option<Polygon> {
        let k = self.incidences.len();
        if k < 2 {
            return None;
        }
        let caps: Vec<(Point, Point)> = self
            .incidences
            .iter()
            .zip(&self.limits)
            .map(|(inc, l)| inc.cap(l.s))
            .collect();
        let mut ring = Vec::new();
        for j in 0..k {
            let a = &self.incidences[j];
            let b = &self.incidences[(j + 1) % k];
            let (r_j, l_j) = caps[j];
            let r_next = caps[(j + 1) % k].0;
            ring.push(r_j);
            ring.push(l_j);
            match &self.corners[j].shape {
                CornerShape::Fillet(f) => {
                    ring.extend(border_run(&a.left, &l_j, &f.tangent_a));
                    ring.extend(f.arc.points(ARC_MAX_STEP));
                    ring.extend(border_run(&b.right, &f.tangent_b, &r_next));
                }
                CornerShape::Miter(m) => {
                    ring.extend(border_run(&a.left, &l_j, &a.left.first()));
                    ring.push(*m);
                    ring.extend(border_run(&b.right, &b.right.first(), &r_next));
                }
                CornerShape::Bevel => {
                    ring.extend(border_run(&a.left, &l_j, &a.left.first()));
                    ring.push(a.left.first());
                    ring.push(b.right.first());
                    ring.extend(border_run(&b.right, &b.right.first(), &r_next));
                }
            }
        }
        Polygon::from_open_ring(simplify_ring(ring)).ok()
    }
}

/// Border vertices strictly between the projections of `from` and `to`,
/// in walking order.
fn border_run(border: &Polyline, from: &Point, to: &Point) -> Vec<Point> {
    let s0 = border.project(from).s;
    let s1 = border.project(to).s;
    let cum = border.cumulative_lengths();
    let eps = 1e-9;
    let mut out: Vec<Point> = border
        .vertices()
        .iter()
        .zip(&cum)
        .filter(|(_, &c)| c > s0.min(s1) + eps && c < s0.max(s1) - eps)
        .map(|(p, _)| *p)
        .collect();
    if s1 < s0 {
        out.reverse();
    }
    out
}

/// Drops repeated and collinear vertices of an open ring.
fn simplify_ring(mut ring: Vec<Point>) -> Vec<Point> {
    ring.dedup_by(|a, b| a.distance(b) < 1e-9);
    while ring.len() > 1 && ring[0].distance(&ring[ring.len() - 1]) < 1e-9 {
        ring.pop();
    }
    loop {
        let n = ring.len();
        if n < 4 {
            return ring;
        }
        let idx = (0..n).find(|&i| {
            let p = ring[(i + n - 1) % n];
            let q = ring[i];
            let r = ring[(i + 1) % n];
            let (u, v) = (q - p, r - q);
            u.cross(v).abs() <= 1e-12 * u.norm() * v.norm() && u.dot(v) > 0.0
        });
        match idx {
            Some(i) => {
                ring.remove(i);
            }
            None => return ring,
        }
    }
}

fn first_direction(line: &Polyline) -> Vec2 {
    let (a, b) = line.segment(0);
    (b - a).normalized()
}

fn corner(a: &Incidence, b: &Incidence, node: &Point, radius: f64, overridden: bool) -> Corner {
    let sweep = (b.angle - a.angle).rem_euclid(TAU);
    let mut clamped = false;
    let shape = if sweep < PI - 1e-9 {
        match max_feasible_fillet(&a.left, &b.right, radius) {
            Some(f) => {
                clamped = f.radius < radius * (1.0 - 1e-9);
                CornerShape::Fillet(f)
            }
            None => CornerShape::Bevel,
        }
    } else if sweep > PI + 1e-9 {
        let (pa, pb) = (a.left.first(), b.right.first());
        let reach = MITER_LIMIT * a.width.max(b.width) / 2.0;
        match line_intersection(pa, first_direction(&a.outward), pb, first_direction(&b.outward)) {
            Some((t, s)) if t < 0.0 && s < 0.0 => {
                let m = pa + first_direction(&a.outward) * t;
                if m.distance(node) <= reach {
                    CornerShape::Miter(m)
                } else {
                    CornerShape::Bevel
                }
            }
            _ => CornerShape::Bevel,
        }
    } else {
        CornerShape::Bevel
    };
    let controller = match &shape {
        CornerShape::Fillet(f) => f.center,
        CornerShape::Miter(m) => *m,
        CornerShape::Bevel => a.left.first().lerp(&b.right.first(), 0.5),
    };
    Corner {
        edge_a: a.edge,
        edge_b: b.edge,
        radius,
        overridden,
        shape,
        clamped,
        controller,
    }
}

/// Border-intersection heuristic for the limit of `e` against the other
/// incidences at the same node.
pub fn heuristic_limit(e: &Incidence, others: &[&Incidence], default_radius: f64) -> f64 {
    let mut best: f64 = 0.0;
    for f in others {
        let mut hit: Option<f64> = None;
        for be in [&e.left, &e.right] {
            for bf in [&f.left, &f.right] {
                for (p, _, _) in be.intersections(bf) {
                    let se = e.outward.project(&p).s;
                    let sf = f.outward.project(&p).s;
                    if se <= e.max_limit() && sf <= f.max_limit() {
                        hit = Some(hit.map_or(se, |h: f64| h.max(se)));
                    }
                }
            }
        }
        let value = match hit {
            Some(s) => s + default_radius,
            None => e.width.max(f.width) / 2.0 + default_radius,
        };
        best = best.max(value);
    }
    best
}

/// Lays out one node from the current network and the user's choices.
pub fn layout_node(net: &Network, node: FeatureId, choices: &UserChoices, cfg: &Config) -> NodeLayout {
    let position = net.nodes.get(&node).map_or(Point::new(0.0, 0.0), |n| n.position);
    let incidences: Vec<Incidence> = net
        .incident(node)
        .iter()
        .map(|id| {
            let e = &net.edges[id];
            let outward = e.outward(node);
            Incidence {
                edge: e.id,
                angle: outward_angle(e, node),
                width: e.width,
                left: border(&outward, e.width / 2.0),
                right: border(&outward, -e.width / 2.0),
                outward,
            }
        })
        .collect();
    let k = incidences.len();

    let mut corners = Vec::new();
    if k >= 2 {
        for j in 0..k {
            let a = &incidences[j];
            let b = &incidences[(j + 1) % k];
            let key = (node, a.edge, b.edge);
            let (r, overridden) = match choices.radii.get(&key) {
                Some(r) => (*r, true),
                None => (cfg.default_radius_m, false),
            };
            corners.push(corner(a, b, &position, r, overridden));
        }
    }

    let limits = incidences
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let cap = e.max_limit();
            if let Some(s) = choices.limits.get(&(node, e.edge)) {
                return Limit {
                    edge: e.edge,
                    s: s.clamp(DEAD_END_LIMIT, cap.max(DEAD_END_LIMIT)),
                    overridden: true,
                };
            }
            let s = if k == 1 {
                DEAD_END_LIMIT
            } else {
                let others: Vec<&Incidence> = incidences
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, x)| x)
                    .collect();
                let mut s = heuristic_limit(e, &others, cfg.default_radius_m);
                // Far enough that the fillets on both sides end before the cap.
                for c in &corners {
                    if let CornerShape::Fillet(f) = &c.shape {
                        if c.edge_a == e.edge {
                            s = s.max(e.outward.project(&f.tangent_a).s);
                        }
                        if c.edge_b == e.edge {
                            s = s.max(e.outward.project(&f.tangent_b).s);
                        }
                    }
                }
                s.min(cap)
            };
            Limit {
                edge: e.edge,
                s,
                overridden: false,
            }
        })
        .collect();

    NodeLayout {
        node,
        position,
        incidences,
        corners,
        limits,
    }
}

/// Axis clipped between the two limits, or `None` when they overlap.
pub fn clipped_axis(axis: &Polyline, s_start: f64, s_end: f64) -> Option<Polyline> {
    let len = axis.length();
    if s_start + s_end >= len {
        return None;
    }
    axis.sub_polyline(s_start, len - s_end).ok()
}

/// Constant-width strip between the two limits.
pub fn section_polygon(axis: &Polyline, width: f64, s_start: f64, s_end: f64) -> Option<Polygon> {
    let clip = clipped_axis(axis, s_start, s_end)?;
    let left = clip.offset(width / 2.0).ok()?;
    let right = clip.offset(-width / 2.0).ok()?;
    let mut ring: Vec<Point> = right.vertices().to_vec();
    ring.extend(left.vertices().iter().rev());
    Polygon::from_open_ring(ring).ok()
}
