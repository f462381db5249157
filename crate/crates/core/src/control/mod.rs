//! The three controller phases: LQR attitude stabilizer, PID wheel-velocity
//! loops, and differential-steering setpoints with turn monitoring.

mod differential;
mod lqr;
mod pid;

pub use differential::{
    differential_setpoints, rotation_error_check, DifferentialCommand, RotationStatus,
    DEFAULT_OFF_AXIS_BOUND,
};
pub use lqr::{
    linearize, solve_care, stabilizer_control, GainReport, LinearModel, LqrGain, LqrWeights,
    Mat3x4, REFERENCE_GAIN_D018,
};
pub use pid::{pid_step, PidGains, PidState};

use crate::dynamics::MotorParams;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("tilt model undefined for bore diameter {diameter} m")]
    GeometryError { diameter: f64 },
    #[error("(A, B) pair is not stabilizable")]
    NotStabilizable,
    #[error("Riccati iteration did not converge (residual {residual:.3e})")]
    NoConvergence { residual: f64 },
    #[error("invalid LQR weights: {0}")]
    InvalidWeights(&'static str),
    #[error("invalid differential command: {0}")]
    InvalidCommand(&'static str),
}

/// Map per-wheel torque requests to terminal voltages through the motor's
/// steady-state relation v = R_m·i + n·k_v·ω with i = τ/(n·k_v), clamped to
/// the supply. `wheel_speeds` are the current output-shaft speeds.
pub fn torque_voltages(torques: [f64; 3], wheel_speeds: [f64; 3], motor: &MotorParams) -> [f64; 3] {
    let mut v = [0.0; 3];
    for i in 0..3 {
        v[i] = motor.steady_state_voltage(torques[i], wheel_speeds[i]);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn torque_voltage_inversion_round_trips() {
        let m = MotorParams::calibrated();
        let v = torque_voltages([0.435, 0.0, -0.1], [10.0, 0.0, 2.0], &m);
        // Full-load operating point uses the whole supply.
        assert_relative_eq!(v[0], 12.0, epsilon = 1e-12);
        assert_eq!(v[1], 0.0);
        // Recover the torque from the steady-state motor equations.
        let i = (v[2] - m.torque_constant_output() * 2.0) / m.r_m;
        assert_relative_eq!(i * m.torque_constant_output(), -0.1, epsilon = 1e-12);
    }

    #[test]
    fn torque_voltage_clamps_at_supply() {
        let m = MotorParams::calibrated();
        let v = torque_voltages([10.0, -10.0, 0.0], [0.0; 3], &m);
        assert_eq!(v[0], m.v_max);
        assert_eq!(v[1], -m.v_max);
    }
}
