use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use streetbase_geom::{
    bezier_eval, fillet_corner, polygon_intersection_area, weighted_orientation_mean, Point,
    Polygon, Polyline, Rect, Vec2,
};

/// Direct Bernstein-polynomial evaluation.
fn bernstein(controls: &[Point], t: f64) -> Point {
    let n = controls.len() - 1;
    let binom = |k: usize| -> f64 { (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64) };
    let (mut x, mut y) = (0.0, 0.0);
    for (k, c) in controls.iter().enumerate() {
        let b = binom(k) * t.powi(k as i32) * (1.0 - t).powi((n - k) as i32);
        x += b * c.x;
        y += b * c.y;
    }
    Point::new(x, y)
}

/// Polyline whose heading stays within ±80° of +x and turns at most 60° per
/// vertex, with segments of 5–15 m.
fn gentle_polyline() -> impl Strategy<Value = Polyline> {
    (
        -100.0..100.0f64,
        -100.0..100.0f64,
        prop::collection::vec((5.0..15.0f64, -1.0..1.0f64), 1..6),
    )
        .prop_map(|(x, y, segs)| {
            let mut pts = vec![Point::new(x, y)];
            let mut heading: f64 = 0.0;
            for (len, turn) in segs {
                heading = (heading + turn * PI / 3.0).clamp(-80f64.to_radians(), 80f64.to_radians());
                let last = *pts.last().unwrap();
                pts.push(last + Vec2::from_angle(heading) * len);
            }
            Polyline::new(pts).unwrap()
        })
}

proptest! {
    #[test]
    fn bezier_matches_bernstein(
        coords in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 2..=4),
        t in 0.0..=1.0f64,
    ) {
        let controls: Vec<Point> = coords.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let a = bezier_eval(&controls, t).unwrap();
        let b = bernstein(&controls, t);
        prop_assert!((a.x - b.x).abs() < 1e-12 * 1e3 && (a.y - b.y).abs() < 1e-12 * 1e3);
    }

    #[test]
    fn projection_round_trip(line in gentle_polyline(), u in 0.0..1.0f64, d in -0.5..0.5f64) {
        let cum = line.cumulative_lengths();
        // Pick s inside a segment, at least 2 m from any vertex.
        let seg = ((u * line.segment_count() as f64) as usize).min(line.segment_count() - 1);
        let (lo, hi) = (cum[seg] + 2.0, cum[seg + 1] - 2.0);
        let s = lo + (hi - lo) * u.fract();
        let (p, _) = line.point_at(s, d).unwrap();
        let proj = line.project(&p);
        prop_assert!((proj.s - s).abs() <= 1e-9 * s.max(1.0), "{} vs {}", proj.s, s);
        prop_assert!((proj.d - d).abs() <= 1e-9, "{} vs {}", proj.d, d);
        let (back, _) = line.point_at(proj.s, proj.d).unwrap();
        prop_assert!(back.distance(&p) < 1e-9);
    }

    #[test]
    fn straight_offset_preserves_length_and_mirrors(
        x0 in -1e3..1e3f64, y0 in -1e3..1e3f64, angle in -PI..PI, len in 0.5..100.0f64,
        d in 0.01..20.0f64,
    ) {
        let a = Point::new(x0, y0);
        let line = Polyline::new(vec![a, a + Vec2::from_angle(angle) * len]).unwrap();
        let left = line.offset(d).unwrap();
        let right = line.offset(-d).unwrap();
        prop_assert!((left.length() - line.length()).abs() < 1e-9 * len.max(1.0));
        for ((l, r), s) in left.vertices().iter().zip(right.vertices()).zip(line.vertices()) {
            // Mirror images: the source vertex is the midpoint.
            prop_assert!(((l.x + r.x) / 2.0 - s.x).abs() < 1e-9);
            prop_assert!(((l.y + r.y) / 2.0 - s.y).abs() < 1e-9);
        }
    }

    #[test]
    fn intersection_area_bounded_and_symmetric(
        ax in -5.0..5.0f64, ay in -5.0..5.0f64, aw in 0.1..6.0f64, ah in 0.1..6.0f64,
        bx in -5.0..5.0f64, by in -5.0..5.0f64, bw in 0.1..6.0f64, bh in 0.1..6.0f64,
        rot in -PI..PI,
    ) {
        let a = Rect::new(ax, ay, ax + aw, ay + ah).to_polygon().unwrap();
        let b0 = Rect::new(bx, by, bx + bw, by + bh).to_polygon().unwrap();
        let b = b0.rotate_about(&b0.centroid(), rot);
        let ab = polygon_intersection_area(&a, &b);
        let ba = polygon_intersection_area(&b, &a);
        prop_assert!(ab >= 0.0);
        prop_assert!(ab <= a.area().min(b.area()) + 1e-9);
        prop_assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn orientation_mean_invariances(
        votes in prop::collection::vec((0.0..PI, 0.1..10.0f64), 1..8),
        scale in 0.01..100.0f64,
        flip in prop::collection::vec(any::<bool>(), 8),
    ) {
        let angles: Vec<f64> = votes.iter().map(|v| v.0).collect();
        let weights: Vec<f64> = votes.iter().map(|v| v.1).collect();
        let base = weighted_orientation_mean(&angles, &weights).unwrap();
        let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let flipped: Vec<f64> = angles.iter().zip(&flip).map(|(a, f)| if *f { a + PI } else { *a }).collect();
        let close = |x: f64, y: f64| { let d = (x - y).rem_euclid(PI); d.min(PI - d) < 1e-9 };
        // Near-cancelling votes leave the mean numerically undefined.
        let (s, c) = angles.iter().zip(&weights).fold((0.0, 0.0), |(s, c), (a, w)| (s + w * (2.0 * a).sin(), c + w * (2.0 * a).cos()));
        prop_assume!(s.hypot(c) > 1e-6);
        prop_assert!(close(base, weighted_orientation_mean(&angles, &scaled).unwrap()));
        prop_assert!(close(base, weighted_orientation_mean(&flipped, &weights).unwrap()));
        prop_assert!((0.0..PI).contains(&base));
    }
}

#[test]
fn fillet_tangency_on_random_corners() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    for _ in 0..1000 {
        let corner = Point::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let ha: f64 = rng.random_range(-PI..PI);
        let opening: f64 = rng.random_range(0.2..(PI - 0.2));
        let r: f64 = rng.random_range(0.1..5.0);
        let len = 200.0;
        let a = Polyline::new(vec![corner, corner + Vec2::from_angle(ha) * len]).unwrap();
        let b = Polyline::new(vec![corner, corner + Vec2::from_angle(ha + opening) * len]).unwrap();
        let f = fillet_corner(&a, &b, r).unwrap();
        assert!((a.distance_to(&f.center) - r).abs() < 1e-9 * r);
        assert!((b.distance_to(&f.center) - r).abs() < 1e-9 * r);
        // Analytic oracle: center lies on the bisector at r / sin(opening/2).
        let expected = corner + Vec2::from_angle(ha + opening / 2.0) * (r / (opening / 2.0).sin());
        assert!(f.center.distance(&expected) < 1e-8 * (1.0 + r / (opening / 2.0).sin()));
    }
}

#[test]
fn half_overlap_matches_monte_carlo() {
    let a = Rect::new(0.0, 0.0, 1.0, 1.0).to_polygon().unwrap();
    let b = Rect::new(0.5, 0.0, 1.5, 1.0).to_polygon().unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    let n = 1_000_000;
    let inside = (0..n)
        .filter(|_| {
            let p = Point::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            a.contains_point(&p) && b.contains_point(&p)
        })
        .count();
    let mc = inside as f64 / n as f64;
    assert!((mc - 0.5).abs() < 1e-2);
    assert!((polygon_intersection_area(&a, &b) - mc).abs() < 1e-2);
}

#[test]
fn nonconvex_intersection_matches_monte_carlo() {
    let notch = Polygon::from_open_ring(vec![
        Point::new(0.0, 0.0),
        Point::new(4.0, 0.0),
        Point::new(4.0, 4.0),
        Point::new(2.0, 1.0),
        Point::new(0.0, 4.0),
    ])
    .unwrap();
    let hex = Polygon::from_open_ring(
        (0..6)
            .map(|k| Point::new(2.0, 2.5) + Vec2::from_angle(k as f64 * PI / 3.0) * 1.8)
            .collect(),
    )
    .unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    let bbox = notch.bbox();
    let n = 400_000;
    let inside = (0..n)
        .filter(|_| {
            let p = Point::new(
                rng.random_range(bbox.min_x..bbox.max_x),
                rng.random_range(bbox.min_y..bbox.max_y),
            );
            notch.contains_point(&p) && hex.contains_point(&p)
        })
        .count();
    let mc = inside as f64 / n as f64 * bbox.width() * bbox.height();
    assert!((polygon_intersection_area(&notch, &hex) - mc).abs() < 0.05);
}
