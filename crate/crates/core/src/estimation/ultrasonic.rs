//! Forward-facing ultrasonic rangefinder.
//!
//! The transducer pings down the bore and hears a return off the next
//! geometry change (bend saddle or tee branch).  Straight pipe ahead of the
//! horizon returns nothing, which is itself information: the filter treats a
//! missing echo as "the next feature is probably beyond max range".

use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::collections::VecDeque;

use crate::pipe_map::PipeMap;

/// Rangefinder characteristics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UltrasonicModel {
    /// Detection horizon [m]; beyond this no echo returns.
    pub max_range: f64,
    /// Range noise, 1-sigma [m].
    pub noise_sigma: f64,
    /// Time between pings [s].
    pub update_period: f64,
    /// Delay between a ping and its reading becoming available [s].
    pub latency: f64,
}

impl Default for UltrasonicModel {
    fn default() -> Self {
        Self {
            max_range: 4.0,
            noise_sigma: 0.01,
            update_period: 0.06,
            latency: 0.02,
        }
    }
}

/// One rangefinder reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RangeReading {
    /// Distance to the next feature [m], noise included.
    Echo(f64),
    /// Nothing within the detection horizon.
    NoEcho,
}

/// Simulate a single ping from arclength `s` along the map.
///
/// Returns `NoEcho` when no feature lies ahead, when the true distance is
/// beyond the horizon, or when noise pushes the reading past it.
pub fn ultrasonic_measure<R: Rng + ?Sized>(
    model: &UltrasonicModel,
    map: &PipeMap,
    s: f64,
    rng: &mut R,
) -> RangeReading {
    // Off-map positions and feature-less stretches alike return silence.
    let Some(d) = map.distance_to_next_feature(s).ok().flatten() else {
        return RangeReading::NoEcho;
    };
    if d > model.max_range {
        return RangeReading::NoEcho;
    }
    let noisy = if model.noise_sigma > 0.0 {
        let n = Normal::new(0.0, model.noise_sigma).expect("noise sigma must be finite");
        (d + n.sample(rng)).max(0.0)
    } else {
        d
    };
    if noisy > model.max_range {
        RangeReading::NoEcho
    } else {
        RangeReading::Echo(noisy)
    }
}

/// Sampling-and-delivery schedule wrapped around the measurement model.
///
/// Pings fire every `update_period`; each reading sits in flight for
/// `latency` before `poll` hands it out.  Random draws happen only at ping
/// times, so the draw sequence is a pure function of the ping schedule and
/// the seed.
#[derive(Debug, Clone)]
pub struct UltrasonicSensor {
    pub model: UltrasonicModel,
    next_ping: f64,
    in_flight: VecDeque<(f64, RangeReading)>,
}

impl UltrasonicSensor {
    pub fn new(model: UltrasonicModel) -> Self {
        Self {
            model,
            next_ping: 0.0,
            in_flight: VecDeque::new(),
        }
    }

    /// Advance the schedule to time `t` with the robot at arclength `s`.
    /// Returns a reading if one finished its flight since the last poll.
    pub fn poll<R: Rng + ?Sized>(
        &mut self,
        map: &PipeMap,
        s: f64,
        t: f64,
        rng: &mut R,
    ) -> Option<RangeReading> {
        while t >= self.next_ping {
            let reading = ultrasonic_measure(&self.model, map, s, rng);
            self.in_flight
                .push_back((self.next_ping + self.model.latency, reading));
            self.next_ping += self.model.update_period;
        }
        if let Some(&(due, reading)) = self.in_flight.front() {
            if t >= due {
                self.in_flight.pop_front();
                return Some(reading);
            }
        }
        None
    }
}
