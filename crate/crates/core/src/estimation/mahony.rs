//! Complementary attitude filter on the IMU.
//!
//! A quaternion estimate is driven by the bias-corrected gyroscope and nudged
//! toward the accelerometer's gravity direction.  The innovation is the cross
//! product between measured and predicted gravity in the body frame; it feeds
//! a proportional term into the integrated rate and an integral term into the
//! gyro bias estimate.  Rotation about gravity (yaw in a horizontal pipe) is
//! unobservable from the accelerometer and rides on the integrated gyro,
//! which is why completed turns are rebased out of the estimate rather than
//! left for the filter to absorb.

use nalgebra::{UnitQuaternion, Vector3};

use super::imu::{gravity_in_pipe_frame, ImuSample};

/// Feedback gains for the attitude filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MahonyGains {
    /// Proportional gain on the gravity-direction error.
    pub kp: f64,
    /// Integral gain feeding the gyro bias estimate.
    pub ki: f64,
}

impl Default for MahonyGains {
    fn default() -> Self {
        Self { kp: 2.0, ki: 0.1 }
    }
}

/// Attitude filter state.
#[derive(Debug, Clone, PartialEq)]
pub struct MahonyState {
    /// Body-to-pipe rotation estimate.
    pub q: UnitQuaternion<f64>,
    /// Gyro bias estimate [rad/s].
    pub bias: Vector3<f64>,
    /// Feedback gains.
    pub gains: MahonyGains,
}

impl MahonyState {
    /// Start from the identity attitude.
    pub fn new(gains: MahonyGains) -> Self {
        Self {
            q: UnitQuaternion::identity(),
            bias: Vector3::zeros(),
            gains,
        }
    }

    /// Start from a known attitude (deployment pose is typically measured).
    pub fn from_attitude(phi: f64, psi: f64, gains: MahonyGains) -> Self {
        let q = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), phi)
            * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), psi);
        Self {
            q,
            bias: Vector3::zeros(),
            gains,
        }
    }

    /// Extract the tilt/yaw pair from the quaternion using the same
    /// `R_y(phi) R_z(psi)` factorization the simulator uses.
    pub fn attitude(&self) -> (f64, f64) {
        let m = self.q.to_rotation_matrix();
        let m = m.matrix();
        let psi = m[(1, 0)].atan2(m[(1, 1)]);
        let phi = m[(0, 2)].atan2(m[(2, 2)]);
        (phi, psi)
    }

    /// Euler angle rates recovered from a raw gyro reading at the current
    /// attitude estimate, bias removed.
    pub fn rates(&self, gyro: Vector3<f64>) -> (f64, f64) {
        let w = gyro - self.bias;
        let (_, psi) = self.attitude();
        let phi_dot = w.x * psi.sin() + w.y * psi.cos();
        let psi_dot = w.z;
        (phi_dot, psi_dot)
    }

    /// Remove a completed tilt rotation from the estimate so the stabilizer's
    /// zero reference points down the new pipe run.
    pub fn rebase_phi(&mut self, angle: f64) {
        self.q = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), -angle) * self.q;
    }

    /// Remove a completed yaw rotation from the estimate.
    pub fn rebase_psi(&mut self, angle: f64) {
        self.q *= UnitQuaternion::from_axis_angle(&Vector3::z_axis(), -angle);
    }
}

/// Advance the filter by one IMU sample over `dt` seconds and return the
/// updated `(phi, psi)` estimate.
pub fn mahony_update(
    state: &mut MahonyState,
    sample: &ImuSample,
    inclination: f64,
    dt: f64,
) -> (f64, f64) {
    let mut omega = sample.gyro - state.bias;

    let accel_norm = sample.accel.norm();
    if accel_norm > 1e-6 {
        let measured_dir = sample.accel / accel_norm;
        let reference = gravity_in_pipe_frame(inclination).normalize();
        let predicted_dir = state.q.inverse_transform_vector(&reference);
        let error = measured_dir.cross(&predicted_dir);
        state.bias -= state.gains.ki * error * dt;
        omega = sample.gyro - state.bias + state.gains.kp * error;
    }

    state.q *= UnitQuaternion::from_scaled_axis(omega * dt);
    state.q.renormalize();
    state.attitude()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::RobotState;
    use crate::estimation::imu::{imu_measure, ImuNoise};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DT: f64 = 1e-3;

    fn quiet() -> ImuNoise {
        ImuNoise {
            accel_sigma: 0.0,
            gyro_sigma: 0.0,
            gyro_bias: Vector3::zeros(),
        }
    }

    #[test]
    fn attitude_extraction_round_trips() {
        for &(phi, psi) in &[(0.0, 0.0), (0.4, -0.3), (-1.2, 0.9), (1.5, 1.5)] {
            let st = MahonyState::from_attitude(phi, psi, MahonyGains::default());
            let (p, s) = st.attitude();
            assert_abs_diff_eq!(p, phi, epsilon = 1e-12);
            assert_abs_diff_eq!(s, psi, epsilon = 1e-12);
        }
    }

    #[test]
    fn tilt_error_decays_within_two_seconds() {
        // Start 20 degrees wrong in tilt; a stationary robot and clean IMU
        // must pull the estimate in well before the two-second mark.
        let truth = RobotState::at_rest();
        let mut st = MahonyState::from_attitude(20f64.to_radians(), 0.0, MahonyGains::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut t = 0.0;
        while t < 2.0 {
            let sample = imu_measure(&truth, 0.0, &quiet(), &mut rng);
            mahony_update(&mut st, &sample, 0.0, DT);
            t += DT;
        }
        let (phi, _) = st.attitude();
        assert!(
            phi.abs() < 0.5f64.to_radians(),
            "tilt error after 2 s: {} deg",
            phi.to_degrees()
        );
    }

    #[test]
    fn tracks_moving_attitude() {
        // Sinusoidal attitude, exact gyro: the estimate follows within a
        // degree once the initial transient passes.
        let mut st = MahonyState::from_attitude(0.0, 0.0, MahonyGains::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t: f64 = 0.0;
        let mut worst: f64 = 0.0;
        while t < 6.0 {
            let phi = 0.3 * (2.0 * t).sin();
            let phi_dot = 0.6 * (2.0 * t).cos();
            let psi = 0.2 * (1.5 * t).sin();
            let psi_dot = 0.3 * (1.5 * t).cos();
            let truth = RobotState {
                phi,
                phi_dot,
                psi,
                psi_dot,
                ..RobotState::at_rest()
            };
            let sample = imu_measure(&truth, 0.0, &quiet(), &mut rng);
            let (p_hat, s_hat) = mahony_update(&mut st, &sample, 0.0, DT);
            if t > 1.0 {
                worst = worst.max((p_hat - phi).abs().max((s_hat - psi).abs()));
            }
            t += DT;
        }
        assert!(
            worst < 1f64.to_radians(),
            "worst tracking error {} deg",
            worst.to_degrees()
        );
    }

    #[test]
    fn gyro_bias_is_learned() {
        // A constant bias on the observable axes ends up in the bias state,
        // not in the attitude.
        let truth = RobotState::at_rest();
        let noise = ImuNoise {
            accel_sigma: 0.0,
            gyro_sigma: 0.0,
            gyro_bias: Vector3::new(0.02, -0.015, 0.0),
        };
        let mut st = MahonyState::from_attitude(0.0, 0.0, MahonyGains::default());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut t = 0.0;
        while t < 90.0 {
            let sample = imu_measure(&truth, 0.0, &noise, &mut rng);
            mahony_update(&mut st, &sample, 0.0, DT);
            t += DT;
        }
        assert_abs_diff_eq!(st.bias.x, 0.02, epsilon = 2e-3);
        assert_abs_diff_eq!(st.bias.y, -0.015, epsilon = 2e-3);
        let (phi, _) = st.attitude();
        assert!(phi.abs() < 0.5f64.to_radians());
    }

    #[test]
    fn yaw_rides_on_the_gyro() {
        // Yaw is unobservable from gravity in a horizontal pipe: with a
        // clean gyro it integrates exactly; the accelerometer does not fight
        // a deliberate yaw offset.
        let mut st = MahonyState::from_attitude(0.0, 0.3, MahonyGains::default());
        let truth = RobotState::at_rest(); // true psi = 0, estimate starts at 0.3
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = 0.0;
        while t < 5.0 {
            let sample = imu_measure(&truth, 0.0, &quiet(), &mut rng);
            mahony_update(&mut st, &sample, 0.0, DT);
            t += DT;
        }
        let (_, psi) = st.attitude();
        // The offset persists (no false correction toward zero).
        assert_abs_diff_eq!(psi, 0.3, epsilon = 5e-3);
    }

    #[test]
    fn rebase_shifts_the_reference_frame() {
        let gains = MahonyGains::default();
        let target = std::f64::consts::FRAC_PI_2;
        let mut st = MahonyState::from_attitude(target + 0.02, 0.01, gains);
        st.rebase_phi(target);
        let (phi, psi) = st.attitude();
        assert_abs_diff_eq!(phi, 0.02, epsilon = 1e-9);
        assert_abs_diff_eq!(psi, 0.01, epsilon = 1e-9);

        let mut st = MahonyState::from_attitude(0.015, -target - 0.03, gains);
        st.rebase_psi(-target);
        let (phi, psi) = st.attitude();
        assert_abs_diff_eq!(phi, 0.015, epsilon = 1e-9);
        assert_abs_diff_eq!(psi, -0.03, epsilon = 1e-9);
    }

    #[test]
    fn quaternion_norm_survives_long_runs() {
        let mut st = MahonyState::from_attitude(0.2, -0.1, MahonyGains::default());
        let sample = ImuSample {
            accel: Vector3::new(0.3, -0.2, -9.7),
            gyro: Vector3::new(0.4, -0.1, 0.2),
        };
        for _ in 0..1_000_000 {
            mahony_update(&mut st, &sample, 0.0, DT);
        }
        assert_abs_diff_eq!(st.q.as_ref().norm(), 1.0, epsilon = 1e-9);
        let (phi, psi) = st.attitude();
        assert!(phi.is_finite() && psi.is_finite());
    }
}
