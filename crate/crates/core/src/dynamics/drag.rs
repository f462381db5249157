//! Empirical flow-drag model from tabulated CFD results.
//!
//! Drag on the robot body is tabulated against the robot's velocity relative
//! to the water (robot speed plus opposing flow speed) at 100 kPa, and
//! against line pressure at 1.2 m/s relative velocity. The two axes combine
//! multiplicatively: CFD showed no meaningful pressure–velocity cross
//! correlation, so pressure acts as a mild scale factor on the velocity
//! curve.
//!
//! Sign convention: negative drag opposes forward motion; the +0.6 N entry at
//! −0.2 m/s is the flow pushing the robot along ("in-direction" motion).

/// Relative-velocity knots, m/s. The 0.0 knot is not part of the tabulated
/// CFD set: the raw table brackets zero between −0.2 and +0.1 m/s, and
/// interpolating across that bracket yields a small spurious force for a
/// robot at rest in still water. A physical zero — no relative motion, no
/// drag — is pinned explicitly; all tabulated knots are preserved exactly.
pub const VELOCITY_KNOTS: [f64; 6] = [-0.2, 0.0, 0.1, 0.5, 1.0, 1.2];

/// Drag at each velocity knot, newtons, at 100 kPa line pressure.
pub const DRAG_AT_100_KPA: [f64; 6] = [0.6, 0.0, -0.2, -6.2, -14.4, -25.9];

/// Line-pressure knots, kPa.
pub const PRESSURE_KNOTS: [f64; 5] = [100.0, 200.0, 300.0, 400.0, 500.0];

/// Drag at each pressure knot, newtons, at 1.2 m/s relative velocity.
pub const DRAG_AT_1_2_MPS: [f64; 5] = [-25.9, -24.4, -18.3, -19.3, -18.9];

/// Piecewise-linear interpolation on a sorted knot axis, clamped to the hull.
/// Returns (value, clamped?).
fn interp(knots: &[f64], values: &[f64], x: f64) -> (f64, bool) {
    let n = knots.len();
    if x <= knots[0] {
        return (values[0], x < knots[0]);
    }
    if x >= knots[n - 1] {
        return (values[n - 1], x > knots[n - 1]);
    }
    let hi = knots.partition_point(|&k| k < x).max(1);
    let (x0, x1) = (knots[hi - 1], knots[hi]);
    let t = (x - x0) / (x1 - x0);
    (values[hi - 1] * (1.0 - t) + values[hi] * t, false)
}

/// Drag force in newtons at a given relative velocity (m/s, robot speed plus
/// opposing flow) and line pressure (kPa). Inputs outside the tabulated hull
/// are clamped to it; see [`drag_force_checked`] to observe the clamp.
pub fn drag_force(rel_velocity: f64, line_pressure: f64) -> f64 {
    drag_force_checked(rel_velocity, line_pressure).0
}

/// As [`drag_force`], also reporting whether either input was clamped to the
/// table hull.
pub fn drag_force_checked(rel_velocity: f64, line_pressure: f64) -> (f64, bool) {
    let (base, v_clamped) = interp(&VELOCITY_KNOTS, &DRAG_AT_100_KPA, rel_velocity);
    let (at_pressure, p_clamped) = interp(&PRESSURE_KNOTS, &DRAG_AT_1_2_MPS, line_pressure);
    let factor = at_pressure / DRAG_AT_1_2_MPS[0];
    (base * factor, v_clamped || p_clamped)
}
