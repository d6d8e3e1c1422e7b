use std::f64::consts::{PI, TAU};

use crate::arc::Arc;
use crate::error::GeomError;
use crate::point::Point;
use crate::polyline::Polyline;
use crate::Result;

/// Circular arc of radius `radius` tangent to two borders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fillet {
    pub center: Point,
    pub radius: f64,
    pub arc: Arc,
    pub tangent_a: Point,
    pub tangent_b: Point,
}

fn side_of(line: &Polyline, other: &Polyline) -> f64 {
    // Probe from the far end inward; the first off-line vertex decides.
    for v in other.vertices().iter().rev() {
        let d = line.project(v).d;
        if d.abs() > 1e-12 {
            return d.signum();
        }
    }
    0.0
}

/// Fillets the corner between two borders with an arc of radius `radius`.
///
/// The arc lies on the side of each border facing the other one. The
/// center is where the two borders, each offset by `radius` toward the
/// other, first cross; the tangent points are the feet of the center on
/// the borders.
pub fn fillet_corner(border_a: &Polyline, border_b: &Polyline, radius: f64) -> Result<Fillet> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(GeomError::invalid(format!("fillet radius {radius} must be positive")));
    }
    let side_a = side_of(border_a, border_b);
    let side_b = side_of(border_b, border_a);
    if side_a == 0.0 || side_b == 0.0 {
        return Err(GeomError::invalid("borders are collinear"));
    }
    let too_large = |_| GeomError::FilletTooLarge(radius);
    let off_a = border_a.offset(side_a * radius).map_err(too_large)?;
    let off_b = border_b.offset(side_b * radius).map_err(too_large)?;
    let (center, _, _) = off_a
        .intersections(&off_b)
        .into_iter()
        .next()
        .ok_or(GeomError::FilletTooLarge(radius))?;
    let pa = border_a.project(&center);
    let pb = border_b.project(&center);
    let tol = 1e-9 * radius.max(1.0);
    if (pa.distance - radius).abs() > tol || (pb.distance - radius).abs() > tol {
        return Err(GeomError::FilletTooLarge(radius));
    }
    let start = (pa.foot - center).angle();
    let mut sweep = (pb.foot - center).angle() - start;
    if sweep > PI {
        sweep -= TAU;
    } else if sweep <= -PI {
        sweep += TAU;
    }
    let arc = Arc::new(center, radius, start, start + sweep)?;
    Ok(Fillet {
        center,
        radius,
        arc,
        tangent_a: pa.foot,
        tangent_b: pb.foot,
    })
}

/// Fillet with the requested radius when it fits, otherwise with the
/// largest radius that does (found by bisection). `None` when not even a
/// vanishing radius fits, e.g. for parallel borders.
pub fn max_feasible_fillet(border_a: &Polyline, border_b: &Polyline, radius: f64) -> Option<Fillet> {
    if let Ok(f) = fillet_corner(border_a, border_b, radius) {
        return Some(f);
    }
    let mut lo = radius * 1e-6;
    let mut best = fillet_corner(border_a, border_b, lo).ok()?;
    let mut hi = radius;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match fillet_corner(border_a, border_b, mid) {
            Ok(f) => {
                lo = mid;
                best = f;
            }
            Err(_) => hi = mid,
        }
        if hi - lo <= 1e-9 * radius {
            break;
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes(len: f64) -> (Polyline, Polyline) {
        (
            Polyline::from_xy(&[(0.0, 0.0), (len, 0.0)]).unwrap(),
            Polyline::from_xy(&[(0.0, 0.0), (0.0, len)]).unwrap(),
        )
    }

    fn near(p: Point, x: f64, y: f64) -> bool {
        (p.x - x).abs() < 1e-12 && (p.y - y).abs() < 1e-12
    }

    #[test]
    fn perpendicular_unit_fillet() {
        let (a, b) = axes(5.0);
        let f = fillet_corner(&a, &b, 1.0).unwrap();
        assert!(near(f.center, 1.0, 1.0));
        assert!(near(f.tangent_a, 1.0, 0.0));
        assert!(near(f.tangent_b, 0.0, 1.0));
        assert!(near(f.arc.start(), 1.0, 0.0));
        assert!(near(f.arc.end(), 0.0, 1.0));
    }

    #[test]
    fn perpendicular_fillet_scales() {
        let (a, b) = axes(5.0);
        let f = fillet_corner(&a, &b, 2.0).unwrap();
        assert!(near(f.center, 2.0, 2.0));
    }

    #[test]
    fn oversized_fillet_is_rejected() {
        let (a, b) = axes(5.0);
        assert_eq!(fillet_corner(&a, &b, 10.0), Err(GeomError::FilletTooLarge(10.0)));
        let clamped = max_feasible_fillet(&a, &b, 10.0).unwrap();
        assert!(clamped.radius <= 5.0 + 1e-6 && clamped.radius > 4.99);
    }

    #[test]
    fn parallel_borders_have_no_fillet() {
        let a = Polyline::from_xy(&[(0.0, 0.0), (5.0, 0.0)]).unwrap();
        let b = Polyline::from_xy(&[(0.0, 1.0), (5.0, 1.0)]).unwrap();
        assert!(max_feasible_fillet(&a, &b, 1.0).is_none());
    }
}
