//! Battery budget: steady-state load, current draw, and achievable range.
//!
//! At cruise the motors fight whatever the water and the grade add up to.
//! The three wall-pressed wheels share that load evenly, each motor draws
//! the current its share demands, and the battery's amp-hours set how long
//! — and therefore how far — the robot can keep it up.

use crate::dynamics::{drag_force_checked, RobotParams};
use crate::units::G;

/// A steady cruising condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    /// Robot speed along the pipe [m/s].
    pub ground_speed: f64,
    /// Water speed along the travel direction [m/s]; negative means
    /// swimming against the flow.
    pub flow_velocity: f64,
    /// Line pressure [kPa].
    pub line_pressure: f64,
    /// Pipe grade [rad]; positive climbs.
    pub inclination: f64,
}

impl OperatingPoint {
    /// Speed of the robot relative to the water [m/s]; this is what the
    /// drag model cares about.
    pub fn relative_water_speed(&self) -> f64 {
        self.ground_speed - self.flow_velocity
    }
}

/// Range estimate with its intermediate quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeReport {
    /// Load each motor carries [N].
    pub per_motor_force: f64,
    /// Current each motor draws for its load [A].
    pub per_motor_current: f64,
    /// All three motors plus avionics [A].
    pub total_current: f64,
    /// Battery endurance at that draw [h].
    pub discharge_hours: f64,
    /// Ground covered over a full discharge [m].
    pub range_meters: f64,
    /// The operating point fell outside the measured drag envelope and was
    /// clamped to its hull.
    pub clamped: bool,
    /// Nothing draws current; endurance and range are unbounded.
    pub infinite: bool,
}

/// Axial load per motor at an operating point [N].
///
/// Opposing drag and climb force split three ways.  A favorable balance
/// (following flow, downhill) would back-drive the wheels; the motors then
/// carry no load, so the result floors at zero rather than going negative.
pub fn per_motor_force(op: &OperatingPoint, p: &RobotParams) -> f64 {
    let (drag, _) = drag_force_checked(op.relative_water_speed(), op.line_pressure);
    // Drag is negative when it opposes forward travel.
    let load = -drag + p.mass * G * op.inclination.sin();
    (load / 3.0).max(0.0)
}

/// Current one motor draws to push with `force` at the wheel [A].
///
/// Steady state: wheel torque through the gear train back to armature
/// current.  `wheel_speed` does not change the torque-side current; it is
/// part of the operating point and kept for callers that pair this with a
/// supply-voltage check.
pub fn motor_current(force: f64, p: &RobotParams, wheel_speed: f64) -> f64 {
    debug_assert!(force >= 0.0 && wheel_speed.is_finite());
    force * p.wheel_radius / p.motor.torque_constant_output()
}

/// Full range estimate at an operating point.
///
/// `avionics_current` covers everything that is not a drive motor (sensing,
/// compute, radio) [A].  A zero-draw point yields infinite endurance; that
/// is reported as a flagged sentinel, not an error, since coasting with the
/// flow is a legitimate — if optimistic — mission plan.
pub fn range_estimate(op: &OperatingPoint, p: &RobotParams, avionics_current: f64) -> RangeReport {
    let (_, clamped) = drag_force_checked(op.relative_water_speed(), op.line_pressure);
    let force = per_motor_force(op, p);
    let wheel_speed = op.ground_speed / p.wheel_radius;
    let current = motor_current(force, p, wheel_speed);
    let total = 3.0 * current + avionics_current;

    if total <= 0.0 {
        log::warn!("operating point draws no current; range is unbounded");
        return RangeReport {
            per_motor_force: force,
            per_motor_current: current,
            total_current: total,
            discharge_hours: f64::INFINITY,
            range_meters: f64::INFINITY,
            clamped,
            infinite: true,
        };
    }

    let hours = p.battery_capacity / total;
    RangeReport {
        per_motor_force: force,
        per_motor_current: current,
        total_current: total,
        discharge_hours: hours,
        range_meters: op.ground_speed * 3600.0 * hours,
        clamped,
        infinite: false,
    }
}
