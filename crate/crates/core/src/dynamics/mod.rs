//! Simulated plant: wall-press geometry, rigid-body equations of motion,
//! gear-motor electrics, empirical drag, and a fixed-step integrator.
//!
//! Geometry and sign conventions. The body x axis points along the pipe in
//! the direction of travel; `phi` is rotation about the body y axis and
//! `psi` about the body z axis — the two "stabilizing" tilts the controller
//! drives to zero. Wheel 1 rides the bottom of the bore, wheels 2 and 3 are
//! spaced 120° around it. Each arm presses its wheel against the wall, so the
//! arm angle θ against the pipe axis satisfies the linkage constraint
//! `L·cos θ = D/2`.

pub mod drag;
pub mod motor;
mod plant;

pub use drag::{drag_force, drag_force_checked};
pub use motor::{motor_step, DynamicsError, MotorParams, MotorState};
pub use plant::integrate_step;

use crate::pipe_map::PipeSegment;
use crate::units::G;

/// How the gravity restoring moment about the body z axis scales with pipe
/// inclination α.
///
/// The two published forms of the yaw equation disagree: the nonlinear
/// equation prints `cos α` where the linearized model's version prints
/// `sin α`. `SinInclination` (the default) makes the moment vanish in a
/// horizontal pipe and is what the stabilizer's linear model assumes, so the
/// controller and plant agree; `CosInclination` reproduces the other form
/// verbatim for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GravityMomentModel {
    #[default]
    SinInclination,
    CosInclination,
}

impl GravityMomentModel {
    fn factor(self, inclination: f64) -> f64 {
        match self {
            GravityMomentModel::SinInclination => inclination.sin(),
            GravityMomentModel::CosInclination => inclination.cos(),
        }
    }
}

/// Chassis, inertia, actuation, and battery constants.
#[derive(Debug, Clone, Copy)]
pub struct RobotParams {
    /// kg.
    pub mass: f64,
    /// Arm length L, m.
    pub arm_length: f64,
    /// Wheel radius R, m.
    pub wheel_radius: f64,
    /// Body inertia about y, kg·m².
    pub i_yy: f64,
    /// Body inertia about z, kg·m².
    pub i_zz: f64,
    pub motor: MotorParams,
    /// V.
    pub battery_voltage: f64,
    /// Ah.
    pub battery_capacity: f64,
    pub gravity_moment: GravityMomentModel,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams {
            mass: 2.23,
            arm_length: 0.17,
            wheel_radius: 0.05,
            i_yy: 0.0126,
            i_zz: 0.0093,
            motor: MotorParams::calibrated(),
            battery_voltage: 12.0,
            battery_capacity: 4.23,
            gravity_moment: GravityMomentModel::default(),
        }
    }
}

impl RobotParams {
    /// cos θ of the arm angle from the linkage constraint `L·cos θ = D/2`.
    /// Unclamped: a bore wider than the arms can reach gives a value above 1,
    /// which downstream lever arms use as-is (the linkage constraint is what
    /// defines the moment arms, reachable or not).
    pub fn arm_cos(&self, diameter: f64) -> f64 {
        diameter / (2.0 * self.arm_length)
    }

    /// sin θ of the arm angle, floored at 0 beyond full arm extension (no
    /// axial arm projection left to generate a gravity moment).
    pub fn arm_sin(&self, diameter: f64) -> f64 {
        let c = self.arm_cos(diameter);
        (1.0 - c * c).max(0.0).sqrt()
    }

    /// Per-wheel velocity lever arms `(a, b)` of the rolling constraint
    /// `R·ω_i = ẋ + a_i·φ̇ + b_i·ψ̇` in a bore of the given diameter.
    ///
    /// Wheel 1 sits on the z axis (bottom), wheels 2 and 3 at ±120° from it;
    /// rotation about y moves wheels 2/3 oppositely and wheel 1 not at all,
    /// rotation about z moves wheel 1 against wheels 2/3.
    pub fn wheel_levers(&self, diameter: f64) -> ([f64; 3], [f64; 3]) {
        let d = diameter;
        let s3 = 3.0_f64.sqrt();
        let a = [0.0, -s3 * d / 4.0, s3 * d / 4.0];
        let b = [-d / 2.0, d / 4.0, d / 4.0];
        (a, b)
    }
}

/// Arm angle θ = arccos(D/(2L)) shared by all three arms.
///
/// Errors when the arms cannot span the bore (D ≥ 2L). The dynamics use the
/// linkage constraint directly and stay defined past that point; this is the
/// geometric answer for a bore the mechanism actually reaches.
pub fn arm_angle(diameter: f64, arm_length: f64) -> Result<f64, DynamicsError> {
    let reach = 2.0 * arm_length;
    if !(diameter > 0.0 && diameter < reach) {
        return Err(DynamicsError::GeometryError { diameter, reach });
    }
    Ok((diameter / reach).acos())
}

/// Traction force at the wall from wheel torque: F = τ/R.
pub fn traction_force(torque: f64, wheel_radius: f64) -> f64 {
    torque / wheel_radius
}

/// Full simulation state of the robot.
#[derive(Debug, Clone, Copy)]
pub struct RobotState {
    /// Arclength along the planned path, m.
    pub s: f64,
    /// Axial velocity ẋ, m/s.
    pub velocity: f64,
    /// Rotation about body y, rad.
    pub phi: f64,
    pub phi_dot: f64,
    /// Rotation about body z, rad.
    pub psi: f64,
    pub psi_dot: f64,
    pub motors: [MotorState; 3],
    /// Simulation time, s.
    pub t: f64,
}

impl RobotState {
    pub fn at_rest() -> Self {
        RobotState {
            s: 0.0,
            velocity: 0.0,
            phi: 0.0,
            phi_dot: 0.0,
            psi: 0.0,
            psi_dot: 0.0,
            motors: [MotorState::default(); 3],
            t: 0.0,
        }
    }

    pub fn with_attitude(phi: f64, psi: f64) -> Self {
        RobotState {
            phi,
            psi,
            ..Self::at_rest()
        }
    }

    /// The stabilizing states x_s = [φ, φ̇, ψ, ψ̇].
    pub fn stabilizing_states(&self) -> [f64; 4] {
        [self.phi, self.phi_dot, self.psi, self.psi_dot]
    }

    /// Wheel speeds the rolling constraint implies for the current body
    /// motion in a bore of the given diameter.
    pub fn constrained_wheel_speeds(&self, diameter: f64, p: &RobotParams) -> [f64; 3] {
        let (a, b) = p.wheel_levers(diameter);
        let mut w = [0.0; 3];
        for i in 0..3 {
            w[i] = (self.velocity + a[i] * self.phi_dot + b[i] * self.psi_dot) / p.wheel_radius;
        }
        w
    }

    pub fn mean_wheel_speed(&self) -> f64 {
        (self.motors[0].speed + self.motors[1].speed + self.motors[2].speed) / 3.0
    }
}

/// Body accelerations produced by a set of wheel traction forces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyAccel {
    /// ẍ, m/s².
    pub linear: f64,
    /// φ̈, rad/s².
    pub phi: f64,
    /// ψ̈, rad/s².
    pub psi: f64,
}

/// Rigid-body accelerations for given per-wheel traction forces `[F1, F2,
/// F3]` in the segment's bore, including gravity along the incline, flow
/// drag on the body, and the gravity restoring moment about z.
///
/// This is the pure force→acceleration map; wheel/rotor inertia reflected
/// through the rolling constraint is accounted for in [`integrate_step`],
/// which owns the constraint coupling.
pub fn rigid_body_derivatives(
    state: &RobotState,
    forces: [f64; 3],
    seg: &PipeSegment,
    p: &RobotParams,
) -> BodyAccel {
    let [f1, f2, f3] = forces;
    let drag = drag_force(state.velocity + seg.flow_velocity, seg.line_pressure);
    let linear = (f1 + f2 + f3 - p.mass * G * seg.inclination.sin() + drag) / p.mass;

    // Moment arm of a wheel's traction about the body axes: the arm's radial
    // projection, L·cos θ = D/2 by the linkage constraint.
    let half_bore = 0.5 * seg.diameter;
    let phi = (3.0_f64.sqrt() / 2.0) * half_bore * (f3 - f2) / p.i_yy;

    let gravity_moment = p.mass
        * G
        * p.gravity_moment.factor(seg.inclination)
        * p.arm_length
        * p.arm_sin(seg.diameter);
    let psi = (half_bore * (0.5 * f2 + 0.5 * f3 - f1) - gravity_moment) / p.i_zz;

    BodyAccel { linear, phi, psi }
}
