//! Coupled motor + rigid-body plant with the no-slip rolling constraint
//! eliminated analytically.
//!
//! Each wheel obeys `R·ω_i = ẋ + a_i·φ̇ + b_i·ψ̇` (levers from
//! [`RobotParams::wheel_levers`]), so wheel speeds are not independent
//! states. Substituting the wheel contact forces out of the per-wheel rotor
//! equations into the body equations couples the gear-train inertia into the
//! body inertia. The lever sums vanish, so the three body equations stay
//! decoupled:
//!
//! * `(m + 3·J_w/R²)·ẍ      = Σ τ_i / R − m·g·sin α + F_drag`
//! * `(I_yy + J_rot)·φ̈      = (√3·D/4)·(τ_3 − τ_2) / R`
//! * `(I_zz + J_rot)·ψ̈      = (D/2)·(τ_2/2 + τ_3/2 − τ_1)/R − M_gravity`
//!
//! with `J_w` the gear-train inertia at the output shaft, `J_rot =
//! (3·D²/8)·J_w/R²` its rotational reflection, and `τ_i = n·k_v·i_i` the
//! output torques. Free states are the body states plus the three armature
//! currents; wheel speeds are recomputed from the constraint after each step.

use super::motor::motor_derivatives;
use super::{drag_force, DynamicsError, RobotParams, RobotState};
use crate::pipe_map::PipeSegment;
use crate::units::G;

pub const MAX_TIMESTEP: f64 = 0.01;

/// [s, ẋ, φ, φ̇, ψ, ψ̇, i₁, i₂, i₃]
type FreeState = [f64; 9];

fn pack(state: &RobotState) -> FreeState {
    [
        state.s,
        state.velocity,
        state.phi,
        state.phi_dot,
        state.psi,
        state.psi_dot,
        state.motors[0].current,
        state.motors[1].current,
        state.motors[2].current,
    ]
}

fn derivatives(y: &FreeState, voltages: [f64; 3], seg: &PipeSegment, p: &RobotParams) -> FreeState {
    let [_, v, _, phi_dot, _, psi_dot, i1, i2, i3] = *y;
    let currents = [i1, i2, i3];
    let d = seg.diameter;
    let r = p.wheel_radius;
    let (a, b) = p.wheel_levers(d);

    let kt = p.motor.torque_constant_output();
    let mut di = [0.0; 3];
    let mut tau = [0.0; 3];
    for i in 0..3 {
        let omega = (v + a[i] * phi_dot + b[i] * psi_dot) / r;
        // Load torque does not enter the current equation; pass 0.
        let (dcur, _) = motor_derivatives(currents[i], omega, voltages[i], 0.0, &p.motor);
        di[i] = dcur;
        tau[i] = kt * currents[i];
    }

    let j_w = p.motor.effective_inertia();
    let j_axial = 3.0 * j_w / (r * r);
    let j_rot = 3.0 * d * d / 8.0 * j_w / (r * r);

    let drag = drag_force(v + seg.flow_velocity, seg.line_pressure);
    let thrust = (tau[0] + tau[1] + tau[2]) / r;
    let accel = (thrust - p.mass * G * seg.inclination.sin() + drag) / (p.mass + j_axial);

    let phi_ddot = (3.0_f64.sqrt() * d / 4.0) * (tau[2] - tau[1]) / r / (p.i_yy + j_rot);

    let gravity_moment =
        p.mass * G * p.gravity_moment.factor(seg.inclination) * p.arm_length * p.arm_sin(d);
    let psi_ddot = ((d / 2.0) * (0.5 * tau[1] + 0.5 * tau[2] - tau[0]) / r - gravity_moment)
        / (p.i_zz + j_rot);

    [
        v, accel, phi_dot, phi_ddot, psi_dot, psi_ddot, di[0], di[1], di[2],
    ]
}

/// Advance the full robot state one fixed RK4 step under constant terminal
/// voltages. Currents are clamped to stall after the step and wheel speeds
/// are restored from the rolling constraint, so Eq-consistency `R·ω_i = ẋ +
/// a_i·φ̇ + b_i·ψ̇` holds exactly on the returned state.
pub fn integrate_step(
    state: &RobotState,
    voltages: [f64; 3],
    seg: &PipeSegment,
    p: &RobotParams,
    dt: f64,
) -> Result<RobotState, DynamicsError> {
    if !(dt > 0.0 && dt <= MAX_TIMESTEP) {
        return Err(DynamicsError::InvalidTimestep {
            dt,
            max: MAX_TIMESTEP,
        });
    }

    let y0 = pack(state);
    let k1 = derivatives(&y0, voltages, seg, p);
    let k2 = derivatives(&rk_probe(&y0, &k1, 0.5 * dt), voltages, seg, p);
    let k3 = derivatives(&rk_probe(&y0, &k2, 0.5 * dt), voltages, seg, p);
    let k4 = derivatives(&rk_probe(&y0, &k3, dt), voltages, seg, p);

    let mut y = y0;
    for i in 0..9 {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }

    let mut next = *state;
    next.s = y[0];
    next.velocity = y[1];
    next.phi = y[2];
    next.phi_dot = y[3];
    next.psi = y[4];
    next.psi_dot = y[5];
    for i in 0..3 {
        next.motors[i].current = y[6 + i].clamp(-p.motor.i_stall, p.motor.i_stall);
    }
    let speeds = next.constrained_wheel_speeds(seg.diameter, p);
    for i in 0..3 {
        next.motors[i].speed = speeds[i];
    }
    next.t = state.t + dt;

    if y.iter().any(|x| !x.is_finite()) {
        return Err(DynamicsError::NumericalDivergence {
            t: next.t,
            what: "non-finite state",
        });
    }
    if next.phi.abs() > std::f64::consts::PI || next.psi.abs() > std::f64::consts::PI {
        return Err(DynamicsError::NumericalDivergence {
            t: next.t,
            what: "attitude beyond ±π",
        });
    }
    Ok(next)
}

fn rk_probe(y: &FreeState, k: &FreeState, h: f64) -> FreeState {
    let mut out = *y;
    for i in 0..9 {
        out[i] += h * k[i];
    }
    out
}
