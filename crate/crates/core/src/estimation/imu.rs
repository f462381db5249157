//! Simulated inertial measurement unit.
//!
//! The body frame is attached to the chassis: x forward along the pipe when
//! the robot is aligned, y to the left, z up.  Attitude relative to the pipe
//! frame is the yaw-after-pitch composition `R = R_y(phi) * R_z(psi)`, so the
//! accelerometer sees gravity rotated into the body frame and the gyroscope
//! sees the body-frame angular velocity assembled from the two Euler rates.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dynamics::RobotState;
use crate::units::G;

/// Noise model for the simulated IMU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuNoise {
    /// Accelerometer white noise, 1-sigma per axis [m/s^2].
    pub accel_sigma: f64,
    /// Gyroscope white noise, 1-sigma per axis [rad/s].
    pub gyro_sigma: f64,
    /// Constant gyroscope bias per axis [rad/s].
    pub gyro_bias: Vector3<f64>,
}

impl Default for ImuNoise {
    fn default() -> Self {
        Self {
            accel_sigma: 0.05,
            gyro_sigma: 0.002,
            gyro_bias: Vector3::zeros(),
        }
    }
}

/// One IMU reading in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Specific force [m/s^2].  Stationary and level this is (0, 0, -g)
    /// in a horizontal pipe.
    pub accel: Vector3<f64>,
    /// Angular rate [rad/s], bias and noise included.
    pub gyro: Vector3<f64>,
}

/// Gravity direction in the pipe frame for a run inclined by `inclination`.
///
/// The pipe frame tilts with the run, so gravity acquires a component along
/// the axis: `(-g sin(alpha), 0, -g cos(alpha))`.
pub(crate) fn gravity_in_pipe_frame(inclination: f64) -> Vector3<f64> {
    Vector3::new(-G * inclination.sin(), 0.0, -G * inclination.cos())
}

/// Body-frame angular velocity for Euler rates `phi_dot`, `psi_dot` at the
/// given attitude.  From `R = R_y(phi) R_z(psi)`:
/// `omega_body = R_z(psi)^T [0, phi_dot, 0]^T + [0, 0, psi_dot]^T`.
pub(crate) fn body_rates(phi_dot: f64, psi: f64, psi_dot: f64) -> Vector3<f64> {
    Vector3::new(phi_dot * psi.sin(), phi_dot * psi.cos(), psi_dot)
}

/// Simulate one IMU reading from the true state.
///
/// `inclination` is the axial tilt of the current pipe segment.  The
/// accelerometer reports gravity (no specific-force terms from the modest
/// accelerations this platform sees), the gyroscope the true body rates; both
/// are corrupted per `noise`.
pub fn imu_measure<R: Rng + ?Sized>(
    state: &RobotState,
    inclination: f64,
    noise: &ImuNoise,
    rng: &mut R,
) -> ImuSample {
    let (sin_phi, cos_phi) = state.phi.sin_cos();
    let (sin_psi, cos_psi) = state.psi.sin_cos();
    // R = R_y(phi) R_z(psi); accel = R^T g_pipe.
    let g_p = gravity_in_pipe_frame(inclination);
    let r = nalgebra::Matrix3::new(
        cos_phi * cos_psi,
        -cos_phi * sin_psi,
        sin_phi,
        sin_psi,
        cos_psi,
        0.0,
        -sin_phi * cos_psi,
        sin_phi * sin_psi,
        cos_phi,
    );
    let mut accel = r.transpose() * g_p;
    let mut gyro = body_rates(state.phi_dot, state.psi, state.psi_dot) + noise.gyro_bias;

    if noise.accel_sigma > 0.0 {
        let n = Normal::new(0.0, noise.accel_sigma).expect("accel sigma must be finite");
        for a in accel.iter_mut() {
            *a += n.sample(rng);
        }
    }
    if noise.gyro_sigma > 0.0 {
        let n = Normal::new(0.0, noise.gyro_sigma).expect("gyro sigma must be finite");
        for w in gyro.iter_mut() {
            *w += n.sample(rng);
        }
    }
    ImuSample { accel, gyro }
}
