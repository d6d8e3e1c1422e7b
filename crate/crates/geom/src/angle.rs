use std::f64::consts::{PI, TAU};

use crate::error::GeomError;
use crate::Result;

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Wraps an undirected orientation into `[0, π)`.
pub fn angle_mod_pi(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Weighted mean of undirected orientations.
///
/// Each orientation is doubled so that `θ` and `θ + π` vote identically,
/// the weighted unit vectors are summed, and the resulting angle is
/// halved back into `[0, π)`.
pub fn weighted_orientation_mean(angles: &[f64], weights: &[f64]) -> Result<f64> {
    if angles.len() != weights.len() {
        return Err(GeomError::invalid("angles and weights differ in length"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(GeomError::invalid("weights must be finite and non-negative"));
    }
    if !weights.iter().any(|&w| w > 0.0) {
        return Err(GeomError::EmptyVote);
    }
    let (mut s, mut c) = (0.0, 0.0);
    for (&a, &w) in angles.iter().zip(weights) {
        let (sin, cos) = (2.0 * a).sin_cos();
        s += w * sin;
        c += w * cos;
    }
    Ok(angle_mod_pi(s.atan2(c) / 2.0))
}
