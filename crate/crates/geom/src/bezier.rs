use crate::error::GeomError;
use crate::point::Point;
use crate::Result;

/// De Casteljau evaluation of a Bézier curve with 2 to 4 control points.
pub fn bezier_eval(controls: &[Point], t: f64) -> Result<Point> {
    if !(2..=4).contains(&controls.len()) {
        return Err(GeomError::invalid(format!(
            "bezier needs 2 to 4 control points, got {}",
            controls.len()
        )));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(GeomError::OutOfRange {
            what: "bezier parameter",
            value: t,
            min: 0.0,
            max: 1.0,
        });
    }
    if t == 0.0 {
        return Ok(controls[0]);
    }
    if t == 1.0 {
        return Ok(controls[controls.len() - 1]);
    }
    let mut pts = [Point::new(0.0, 0.0); 4];
    pts[..controls.len()].copy_from_slice(controls);
    for level in (1..controls.len()).rev() {
        for i in 0..level {
            pts[i] = pts[i].lerp(&pts[i + 1], t);
        }
    }
    Ok(pts[0])
}

/// Samples the curve at `segments + 1` uniformly spaced parameters.
pub fn bezier_polyline(controls: &[Point], segments: usize) -> Result<Vec<Point>> {
    let n = segments.max(1);
    (0..=n).map(|k| bezier_eval(controls, k as f64 / n as f64)).collect()
}
