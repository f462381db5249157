//! Unit conversions and physical constants.
//!
//! Everything internal is SI (meters, radians, seconds, amperes). Inches and
//! rpm show up in pipe specifications and motor data sheets, so conversions
//! live here and are applied at input boundaries only.

/// Standard gravity, m/s².
pub const G: f64 = 9.806_65;

pub const METERS_PER_INCH: f64 = 0.0254;

/// Inches → meters.
pub fn inches(x: f64) -> f64 {
    x * METERS_PER_INCH
}

/// Meters → inches.
pub fn to_inches(m: f64) -> f64 {
    m / METERS_PER_INCH
}

/// Revolutions per minute → rad/s.
pub fn rpm(x: f64) -> f64 {
    x * std::f64::consts::TAU / 60.0
}

/// rad/s → revolutions per minute.
pub fn to_rpm(w: f64) -> f64 {
    w * 60.0 / std::f64::consts::TAU
}

/// Degrees → radians.
pub fn deg(x: f64) -> f64 {
    x.to_radians()
}

/// Radians → degrees.
pub fn to_deg(x: f64) -> f64 {
    x.to_degrees()
}
