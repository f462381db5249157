//! State estimation: simulated sensors, attitude filtering, and axial
//! localization along the pipe map.
//!
//! The robot carries an IMU (accelerometer + gyroscope) and a forward-facing
//! ultrasonic rangefinder.  Attitude (roll about the pipe axis is irrelevant;
//! the two angles of interest are the in-plane tilt `phi` and yaw `psi`) comes
//! from a complementary filter on the IMU.  Axial position comes from a
//! particle filter that fuses wheel odometry with range returns off the next
//! pipe feature.  A dense grid filter over the same measurement model serves
//! as a slow reference implementation for cross-checking the particle filter.

mod grid;
mod imu;
mod mahony;
mod particle;
mod ultrasonic;

pub use grid::GridFilter;
pub use imu::{imu_measure, ImuNoise, ImuSample};
pub use mahony::{mahony_update, MahonyGains, MahonyState};
pub use particle::{
    pf_estimate, pf_init, pf_init_at, pf_predict, pf_update, BeliefState, BeliefSummary, PfConfig,
};
pub use ultrasonic::{ultrasonic_measure, RangeReading, UltrasonicModel, UltrasonicSensor};

use thiserror::Error;

/// Estimation failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    /// A particle filter needs at least two particles to carry a spread.
    #[error("particle count {0} is too small (need at least 2)")]
    InvalidParticleCount(usize),
    /// Every particle's likelihood fell to the floor; the belief was
    /// reinitialized uniformly over the map.
    #[error("all particle likelihoods degenerate; belief reset to uniform")]
    Degenerate,
}

/// Error function, Abramowitz & Stegun 7.1.26 (max error ~1.5e-7).
///
/// Accurate far beyond the needs of the measurement model, and keeps the
/// likelihood code free of an external special-functions dependency.
pub(crate) fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736
                + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Standard normal cumulative distribution function.
pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Normal probability density with standard deviation `sigma`.
pub(crate) fn normal_pdf(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}
