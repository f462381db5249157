//! Positional PID for wheel-velocity loops.
//!
//! Derivative acts on the measurement (not the error) so setpoint steps do
//! not kick the output; the integral is clamped for anti-windup. Output is
//! a voltage command clamped to the supply.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub k_p: f64,
    pub k_i: f64,
    pub k_d: f64,
    /// Output clamp, V.
    pub output_limit: f64,
    /// Integral-state clamp (anti-windup), in integrated-error units.
    pub integral_limit: f64,
}

impl Default for PidGains {
    /// Wheel-velocity loop gains; integral clamp sized so the integral term
    /// alone can just saturate the output.
    fn default() -> Self {
        let k_i = 322.4160;
        let output_limit = 12.0;
        PidGains {
            k_p: 8.7313,
            k_i,
            k_d: 0.0073,
            output_limit,
            integral_limit: output_limit / k_i,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PidState {
    integral: f64,
    last_measurement: Option<f64>,
}

impl PidState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// One PID update: returns the clamped output for the current
/// setpoint/measurement pair.
pub fn pid_step(g: &PidGains, setpoint: f64, measurement: f64, st: &mut PidState, dt: f64) -> f64 {
    debug_assert!(dt > 0.0);
    let error = setpoint - measurement;
    st.integral = (st.integral + error * dt).clamp(-g.integral_limit, g.integral_limit);
    let derivative = match st.last_measurement {
        Some(last) => -(measurement - last) / dt,
        None => 0.0,
    };
    st.last_measurement = Some(measurement);
    (g.k_p * error + g.k_i * st.integral + g.k_d * derivative)
        .clamp(-g.output_limit, g.output_limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_step, RobotParams, RobotState};
    use crate::pipe_map::PipeSegment;
    use approx::assert_relative_eq;

    #[test]
    fn no_error_no_output() {
        let g = PidGains::default();
        let mut st = PidState::new();
        assert_eq!(pid_step(&g, 5.0, 5.0, &mut st, 1e-3), 0.0);
    }

    #[test]
    fn constant_error_accumulates_p_plus_i() {
        let g = PidGains {
            output_limit: 1e9,
            integral_limit: 1e9,
            ..PidGains::default()
        };
        let mut st = PidState::new();
        let e = 0.01;
        let dt = 1e-3;
        let mut out = 0.0;
        for _ in 0..1000 {
            out = pid_step(&g, e, 0.0, &mut st, dt);
        }
        // After T = 1 s of constant error: K_p·e + K_I·e·T, derivative silent.
        assert_relative_eq!(out, g.k_p * e + g.k_i * e * 1.0, max_relative = 1e-9);
    }

    #[test]
    fn derivative_on_measurement_ignores_setpoint_steps() {
        let g = PidGains {
            k_p: 0.0,
            k_i: 0.0,
            k_d: 1.0,
            output_limit: 100.0,
            integral_limit: 1.0,
        };
        let mut st = PidState::new();
        pid_step(&g, 0.0, 0.0, &mut st, 1e-3);
        // Setpoint jumps, measurement still: no derivative kick.
        assert_eq!(pid_step(&g, 100.0, 0.0, &mut st, 1e-3), 0.0);
        // Measurement moves: derivative resists the motion.
        let out = pid_step(&g, 100.0, 0.5, &mut st, 1e-3);
        assert!(out < 0.0);
    }

    #[test]
    fn reduces_to_pure_proportional() {
        let g = PidGains {
            k_i: 0.0,
            k_d: 0.0,
            ..PidGains::default()
        };
        let mut st = PidState::new();
        for _ in 0..50 {
            let out = pid_step(&g, 2.0, 1.0, &mut st, 1e-3);
            assert_relative_eq!(out, g.k_p, epsilon = 1e-12);
        }
    }

    #[test]
    fn integral_windup_clamped() {
        let g = PidGains::default();
        let mut st = PidState::new();
        for _ in 0..100_000 {
            pid_step(&g, 50.0, 0.0, &mut st, 1e-3);
        }
        assert!(st.integral <= g.integral_limit + 1e-12);
        // Clamp releases promptly once the error flips.
        let mut out_after_flip = 0.0;
        for _ in 0..2000 {
            out_after_flip = pid_step(&g, -50.0, 0.0, &mut st, 1e-3);
        }
        assert_eq!(out_after_flip, -g.output_limit);
    }

    #[test]
    fn output_clamped_to_limit() {
        let g = PidGains::default();
        let mut st = PidState::new();
        let out = pid_step(&g, 1000.0, 0.0, &mut st, 1e-3);
        assert_eq!(out, g.output_limit);
    }

    #[test]
    fn wheel_speed_step_tracks_on_the_loaded_wheel() {
        // Closed loop through the full plant: one common voltage, mean wheel
        // speed fed back — exactly how the cruise loop runs.  The wheels
        // carry the robot's reflected inertia and the water drag, which is
        // the plant these gains are sized for; a 10 rad/s step (0.5 m/s)
        // must hold the 5% band from well under a second and land on the
        // setpoint.
        let g = PidGains::default();
        let p = RobotParams::default();
        let seg = PipeSegment::straight(100.0, 0.3556);
        let mut st = PidState::new();
        let mut state = RobotState::at_rest();
        let dt = 1e-3;
        let target = 10.0;
        let mut in_band_since = None;
        for step in 0..2000 {
            let speed = state.mean_wheel_speed();
            let v = pid_step(&g, target, speed, &mut st, dt);
            state = integrate_step(&state, [v; 3], &seg, &p, dt).unwrap();
            let t = (step + 1) as f64 * dt;
            if (state.mean_wheel_speed() - target).abs() <= 0.05 * target {
                in_band_since.get_or_insert(t);
            } else {
                in_band_since = None;
            }
        }
        let settled = in_band_since.expect("never reached 5% band");
        assert!(settled < 1.0, "settled at {settled} s");
        assert_relative_eq!(state.mean_wheel_speed(), target, max_relative = 0.01);
    }
}
