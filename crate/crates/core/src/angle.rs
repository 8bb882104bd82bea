//! Wrap-aware angle arithmetic in degrees.
//!
//! Headings and articulated angles live on a circle; plain subtraction near
//! the ±180° seam produces 360° artifacts. Every angle difference and every
//! angle RMS in this crate goes through these helpers.

/// Wraps an angle to the half-open interval (-180, 180] degrees.
pub fn wrap_deg(angle: f64) -> f64 {
    let w = angle.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Signed difference `a - b` wrapped to (-180, 180] degrees.
pub fn diff_deg(a: f64, b: f64) -> f64 {
    wrap_deg(a - b)
}

/// RMS of wrapped angle differences, in degrees.
///
/// Returns 0 for an empty pairing.
pub fn rms_diff_deg(pairs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (a, b) in pairs {
        let d = diff_deg(a, b);
        sum += d * d;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}
