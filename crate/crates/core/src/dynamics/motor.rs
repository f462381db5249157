//! Brushed gear-motor electrical and rotor dynamics.
//!
//! Model: armature RL circuit with back-EMF, rigid gear train of ratio `n`,
//! torque constant equal to the back-EMF constant in SI (the usual ideal-DC
//! machine identity). States are armature current and *output-shaft* speed
//! (the wheel side of the gearbox).

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("arms cannot span the pipe: diameter {diameter} m ≥ 2·L = {reach} m")]
    GeometryError { diameter: f64, reach: f64 },
    #[error("timestep {dt} s outside (0, {max}] s")]
    InvalidTimestep { dt: f64, max: f64 },
    #[error("state left sanity bounds at t = {t} s: {what}")]
    NumericalDivergence { t: f64, what: &'static str },
}

#[derive(Debug, Clone, Copy)]
pub struct MotorParams {
    /// Torque / back-EMF constant at the rotor, N·m/A (= V·s/rad).
    pub k_v: f64,
    /// Armature inductance, H.
    pub l_m: f64,
    /// Armature resistance, Ω.
    pub r_m: f64,
    /// Gear ratio, output:rotor speed = 1:n.
    pub n: f64,
    /// Gear-train inertia at the rotor, kg·m².
    pub i_l: f64,
    /// Rotor inertia, kg·m².
    pub i_r: f64,
    /// Supply voltage limit, V.
    pub v_max: f64,
    /// Stall current limit, A.
    pub i_stall: f64,
}

impl MotorParams {
    /// Default parameters, calibrated so the documented full-load operating
    /// point holds exactly: each wheel delivers 8.7 N of traction (0.435 N·m
    /// on a 0.05 m wheel) at 0.5 m/s (10 rad/s output) while drawing 0.47 A
    /// from a 12 V supply.
    ///
    /// Derivation, in order:
    /// * output torque constant `n·k_v = 0.435 / 0.47` N·m/A — torque pin;
    /// * `r_m = (12 − n·k_v·10) / 0.47` Ω — the 12 V supply is fully used at
    ///   the operating point (back-EMF plus resistive drop);
    /// * inductance and inertias are data-sheet-scale values for a ~35:1
    ///   planetary gear-motor of this size; they shape transients only and
    ///   leave every steady-state pin untouched.
    pub fn calibrated() -> Self {
        let n = 35.0;
        let torque_constant_output = 0.435 / 0.47;
        let k_v = torque_constant_output / n;
        let back_emf_at_op = torque_constant_output * 10.0;
        let r_m = (12.0 - back_emf_at_op) / 0.47;
        MotorParams {
            k_v,
            l_m: 0.0058,
            r_m,
            n,
            i_l: 6.0e-5,
            i_r: 4.0e-7,
            v_max: 12.0,
            i_stall: 2.5,
        }
    }

    /// Output-shaft torque per ampere, N·m/A.
    pub fn torque_constant_output(&self) -> f64 {
        self.n * self.k_v
    }

    /// Gear-train + rotor inertia as it appears at the output shaft, kg·m²
    /// (the denominator of the output-shaft acceleration).
    pub fn effective_inertia(&self) -> f64 {
        self.i_l + self.n * self.n * self.i_r
    }

    /// Steady-state armature voltage that sustains `tau_out` N·m at the
    /// output shaft while it spins at `omega_out` rad/s (clamped to supply).
    pub fn steady_state_voltage(&self, tau_out: f64, omega_out: f64) -> f64 {
        let i = tau_out / self.torque_constant_output();
        let v = self.r_m * i + self.torque_constant_output() * omega_out;
        v.clamp(-self.v_max, self.v_max)
    }
}

/// Electrical + rotational state of one gear-motor.
#[derive(Debug, Clone, Copy, Default)]
pub struct MotorState {
    /// Armature current, A.
    pub current: f64,
    /// Output-shaft (wheel) angular velocity, rad/s.
    pub speed: f64,
}

/// Current and output-speed derivatives for given terminal voltage (clamped
/// to supply) and opposing load torque at the output shaft.
pub(crate) fn motor_derivatives(
    current: f64,
    speed: f64,
    voltage: f64,
    load_torque: f64,
    p: &MotorParams,
) -> (f64, f64) {
    let v = voltage.clamp(-p.v_max, p.v_max);
    let back_emf = p.torque_constant_output() * speed;
    let di = (v - back_emf - p.r_m * current) / p.l_m;
    let domega = (p.torque_constant_output() * current - load_torque) / p.effective_inertia();
    (di, domega)
}

/// Advance one motor by a single RK4 step under constant terminal voltage and
/// constant opposing load torque at the output shaft. Stall current is
/// clamped after the step.
pub fn motor_step(
    state: MotorState,
    voltage: f64,
    load_torque: f64,
    p: &MotorParams,
    dt: f64,
) -> MotorState {
    let f = |i: f64, w: f64| motor_derivatives(i, w, voltage, load_torque, p);
    let (k1i, k1w) = f(state.current, state.speed);
    let (k2i, k2w) = f(state.current + 0.5 * dt * k1i, state.speed + 0.5 * dt * k1w);
    let (k3i, k3w) = f(state.current + 0.5 * dt * k2i, state.speed + 0.5 * dt * k2w);
    let (k4i, k4w) = f(state.current + dt * k3i, state.speed + dt * k3w);
    let current = state.current + dt / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i);
    let speed = state.speed + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
    MotorState {
        current: current.clamp(-p.i_stall, p.i_stall),
        speed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rest_is_equilibrium() {
        let p = MotorParams::calibrated();
        let s = motor_step(MotorState::default(), 0.0, 0.0, &p, 1e-3);
        assert_eq!(s.current, 0.0);
        assert_eq!(s.speed, 0.0);
    }

    #[test]
    fn free_spin_reaches_back_emf_balance() {
        let p = MotorParams::calibrated();
        let v = 6.0;
        let mut s = MotorState::default();
        for _ in 0..5000 {
            s = motor_step(s, v, 0.0, &p, 1e-3);
        }
        // Ideal machine, no friction: zero steady current, ω at v / (n·k_v).
        assert_relative_eq!(s.speed, v / p.torque_constant_output(), max_relative = 1e-6);
        assert!(s.current.abs() < 1e-6);
    }

    #[test]
    fn full_load_operating_point_pins() {
        let p = MotorParams::calibrated();
        let load = 0.435; // 8.7 N on a 0.05 m wheel
        let mut s = MotorState::default();
        for _ in 0..20_000 {
            s = motor_step(s, 12.0, load, &p, 1e-3);
        }
        assert_relative_eq!(s.current, 0.47, max_relative = 1e-9);
        assert_relative_eq!(s.speed, 10.0, max_relative = 1e-9);
        assert_relative_eq!(p.steady_state_voltage(load, 10.0), 12.0, epsilon = 1e-12);
    }

    #[test]
    fn stall_current_clamped() {
        let p = MotorParams::calibrated();

        // Locked shaft at full supply settles at V/R, below the clamp: the
        // winding resistance comes from the rated operating point, so plain
        // stall never needs limiting.
        let mut s = MotorState::default();
        for _ in 0..2000 {
            let hold = p.torque_constant_output() * s.current;
            s = motor_step(s, 12.0, hold, &p, 1e-3);
            s.speed = 0.0;
        }
        assert_relative_eq!(s.current, 12.0 / p.r_m, max_relative = 1e-9);
        assert!(s.current < p.i_stall);

        // Plugging — full supply against a back-driven shaft — would settle
        // at (V + k·|ω|)/R, past the limit; the clamp holds it at i_stall.
        let mut s = MotorState {
            current: 0.0,
            speed: -10.0,
        };
        for _ in 0..2000 {
            let hold = p.torque_constant_output() * s.current;
            s = motor_step(s, 12.0, hold, &p, 1e-3);
            s.speed = -10.0;
        }
        let unclamped = (12.0 + p.torque_constant_output() * 10.0) / p.r_m;
        assert!(unclamped > p.i_stall);
        assert_relative_eq!(s.current, p.i_stall, max_relative = 1e-12);
    }

    #[test]
    fn supply_voltage_clamped() {
        let p = MotorParams::calibrated();
        let mut a = MotorState::default();
        let mut b = MotorState::default();
        for _ in 0..200 {
            a = motor_step(a, 100.0, 0.0, &p, 1e-3);
            b = motor_step(b, p.v_max, 0.0, &p, 1e-3);
        }
        assert_eq!(a.current, b.current);
        assert_eq!(a.speed, b.speed);
    }
}
