//! Differential-steering setpoints for turning through bends and
//! T-junctions, and the rotation progress monitor.
//!
//! A turn is produced by running the three wheels at two speeds. Which wheel
//! gets which speed depends on the rotation axis and sign:
//!
//! | motion | wheel 1     | wheel 2 | wheel 3 |
//! |--------|-------------|---------|---------|
//! | φ > 0  | mean        | min     | max     |
//! | φ < 0  | mean        | max     | min     |
//! | ψ > 0  | min         | max     | max     |
//! | ψ < 0  | max         | min     | min     |
//!
//! For φ-turns wheel 1 rides the rotation axis, so it keeps the mean speed
//! (mean = ½(max+min)) and the robot's centerline speed is unchanged; for
//! ψ-turns wheel 1 opposes the pair.

use super::ControlError;
use crate::dynamics::RobotParams;
use crate::pipe_map::DesiredTurn;

/// Speed pair and turn direction for one feature traversal.
#[derive(Debug, Clone, Copy)]
pub struct DifferentialCommand {
    pub turn: DesiredTurn,
    /// rad/s at the wheel.
    pub omega_max: f64,
    pub omega_min: f64,
    /// Signed rotation target, rad (±π/2 for 90° features).
    pub target_angle: f64,
}

impl DifferentialCommand {
    pub fn new(turn: DesiredTurn, omega_max: f64, omega_min: f64) -> Result<Self, ControlError> {
        if !turn.is_turn() {
            return Err(ControlError::InvalidCommand(
                "straight-through crossing needs no differential command",
            ));
        }
        if !(omega_max >= omega_min && omega_min >= 0.0) {
            return Err(ControlError::InvalidCommand(
                "need omega_max ≥ omega_min ≥ 0",
            ));
        }
        Ok(DifferentialCommand {
            turn,
            omega_max,
            omega_min,
            target_angle: turn.target_angle(),
        })
    }

    /// Speed pair for crossing a feature of the given wall radii at
    /// `center_speed` m/s along the centerline: wheel speeds scale with
    /// their path radii, keeping the centerline wheel at `center_speed/R`.
    pub fn for_feature(
        turn: DesiredTurn,
        center_speed: f64,
        inner_radius: f64,
        outer_radius: f64,
        p: &RobotParams,
    ) -> Result<Self, ControlError> {
        if !(center_speed > 0.0 && inner_radius > 0.0 && outer_radius > inner_radius) {
            return Err(ControlError::InvalidCommand(
                "need positive center speed and outer radius > inner radius",
            ));
        }
        let omega_center = center_speed / p.wheel_radius;
        let sum = inner_radius + outer_radius;
        let omega_max = 2.0 * omega_center * outer_radius / sum;
        let omega_min = 2.0 * omega_center * inner_radius / sum;
        Self::new(turn, omega_max, omega_min)
    }
}

/// Per-wheel speed setpoints `[ω_1d, ω_2d, ω_3d]` for a differential command.
pub fn differential_setpoints(cmd: &DifferentialCommand) -> [f64; 3] {
    let hi = cmd.omega_max;
    let lo = cmd.omega_min;
    let mean = 0.5 * (hi + lo);
    match cmd.turn {
        DesiredTurn::PhiPositive => [mean, lo, hi],
        DesiredTurn::PhiNegative => [mean, hi, lo],
        DesiredTurn::PsiPositive => [lo, hi, hi],
        DesiredTurn::PsiNegative => [hi, lo, lo],
        DesiredTurn::StraightThrough => [mean, mean, mean],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationStatus {
    InProgress,
    Completed,
    Deviating,
}

/// Default off-axis deviation bound for [`rotation_error_check`], rad (25°).
pub const DEFAULT_OFF_AXIS_BOUND: f64 = 25.0 * std::f64::consts::PI / 180.0;

/// Monitor turn progress from the estimated attitude: `Completed` once the
/// commanded axis reaches the target within `tol`, `Deviating` if the other
/// axis strays past `off_axis_bound` first.
pub fn rotation_error_check(
    phi: f64,
    psi: f64,
    cmd: &DifferentialCommand,
    tol: f64,
    off_axis_bound: f64,
) -> RotationStatus {
    debug_assert!(tol > 0.0);
    let (on_axis, off_axis) = if cmd.turn.about_phi() {
        (phi, psi)
    } else {
        (psi, phi)
    };
    if (on_axis - cmd.target_angle).abs() <= tol {
        RotationStatus::Completed
    } else if off_axis.abs() > off_axis_bound {
        RotationStatus::Deviating
    } else {
        RotationStatus::InProgress
    }
}
