//! Mission supervision: phase sequencing, junction handling, and the
//! closed-loop mission engine.
//!
//! A mission walks a configured route: cruise down the bore, slow and hold
//! just short of each mapped feature, inspect, execute the configured
//! maneuver (corner turn or straight pass), re-stabilize, and continue to
//! the extraction point.  The supervisor runs at 100 Hz on top of the 1 kHz
//! control loops and sees only estimated quantities — attitude from the
//! complementary filter, position from the particle filter — never the
//! simulator's ground truth.

mod sim;

pub use sim::{mission_run, FeatureEvent, MissionReport, MissionSetup, TraceRow};

use thiserror::Error;

use crate::control::{LqrWeights, PidGains, DEFAULT_OFF_AXIS_BOUND};
use crate::estimation::{BeliefSummary, ImuNoise, MahonyGains, PfConfig, UltrasonicModel};
use crate::pipe_map::PipeMap;

/// Mission phases, named for what the robot is doing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavPhase {
    /// Driving forward at cruise speed, watching for the next feature.
    Cruise,
    /// Stopped short of a feature, holding attitude while inspecting.
    Hold,
    /// Rotating in place to line up with a branch.
    Steer,
    /// Turn finished; damping out residual attitude motion before moving on.
    Settle,
    /// Reached the extraction point with the route fully executed.
    Done,
    /// Unrecoverable condition; mission abandoned in place.
    Fault,
}

impl NavPhase {
    /// Stable lower-case label used in traces and logs.
    pub fn as_str(&self) -> &'static str {
        match self {
            NavPhase::Cruise => "cruise",
            NavPhase::Hold => "hold",
            NavPhase::Steer => "steer",
            NavPhase::Settle => "settle",
            NavPhase::Done => "done",
            NavPhase::Fault => "fault",
        }
    }
}

/// How fast to swing the wheels for one configured maneuver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TurnSpeeds {
    /// Derive outer/inner wheel speeds from a chassis center speed [m/s]
    /// and the feature's bend radii.
    FromCenterSpeed(f64),
    /// Use explicit outer/inner wheel speeds [rad/s].
    Explicit { omega_max: f64, omega_min: f64 },
}

/// Sensor suite configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SensorConfig {
    pub imu: ImuNoise,
    pub ultrasonic: UltrasonicModel,
    pub mahony: MahonyGains,
    pub pf: PfConfig,
}

/// Mission-level tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionConfig {
    /// Cruise speed along the pipe [m/s].
    pub cruise_speed: f64,
    /// Stop this far short of a feature [m].  One bore diameter of the
    /// largest supported pipe leaves room to swing the chassis.
    pub trigger_distance: f64,
    /// Position belief must be at least this sharp before a feature stop
    /// is allowed to trigger [m, 1-sigma].
    pub trigger_std_gate: f64,
    /// Placement uncertainty at the insertion point [m, 1-sigma].  The
    /// localizer's initial cloud is seeded at the start arclength with this
    /// spread; zero trusts the surveyed start exactly.
    pub start_belief_sigma: f64,
    /// Wheel-speed plans per route entry; entries beyond this list fall
    /// back to `FromCenterSpeed(cruise_speed)`.
    pub turn_speeds: Vec<TurnSpeeds>,
    /// A rotation is complete within this of the target [rad].
    pub rotation_tolerance: f64,
    /// A rotation has gone wrong when the other axis strays past this [rad].
    pub off_axis_bound: f64,
    /// Settle ends when both estimated angles are inside this [rad].
    pub settle_threshold: f64,
    /// Give up on a rotation after this long [s].
    pub steer_timeout: f64,
    /// Give up on settling after this long [s].
    pub settle_timeout: f64,
    /// Hold this long to re-stabilize before retrying a failed rotation [s].
    pub retry_hold_time: f64,
    /// Abandon the mission after this long [s].
    pub max_mission_time: f64,
    /// Attitude stabilizer weights.
    pub lqr_weights: LqrWeights,
    /// Wheel-speed loop gains.
    pub pid: PidGains,
    /// Seed for every random stream in the mission.
    pub seed: u64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            cruise_speed: 0.1,
            trigger_distance: crate::units::inches(14.0),
            trigger_std_gate: 0.15,
            start_belief_sigma: 0.5,
            turn_speeds: Vec::new(),
            rotation_tolerance: 2f64.to_radians(),
            off_axis_bound: DEFAULT_OFF_AXIS_BOUND,
            settle_threshold: 3f64.to_radians(),
            steer_timeout: 15.0,
            settle_timeout: 10.0,
            retry_hold_time: 2.0,
            max_mission_time: 600.0,
            lqr_weights: LqrWeights::default(),
            pid: PidGains::default(),
            seed: 0,
        }
    }
}

/// Why a mission faulted.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FaultReason {
    /// The off-axis angle blew past its bound during a rotation, twice.
    #[error("rotation at route entry {entry} kept deviating off-axis")]
    RotationDeviating { entry: usize },
    /// A rotation failed to reach its target in time, twice.
    #[error("rotation at route entry {entry} timed out")]
    SteerTimeout { entry: usize },
    /// Post-turn stabilization never converged.
    #[error("post-turn stabilization timed out")]
    SettleTimeout,
    /// The plant integrator detected a non-physical state.
    #[error("numerical divergence: {0}")]
    Divergence(String),
}

/// Mission failures.  Fault and timeout carry the partial report so the
/// trace up to the failure can still be inspected.
#[derive(Debug, Error)]
pub enum MissionError {
    #[error("mission fault: {reason}")]
    Fault {
        reason: FaultReason,
        report: Box<MissionReport>,
    },
    #[error("mission exceeded the {limit} s budget")]
    Timeout {
        limit: f64,
        report: Box<MissionReport>,
    },
    #[error("gain synthesis failed: {0}")]
    Control(#[from] crate::control::ControlError),
    #[error("estimator setup failed: {0}")]
    Estimation(#[from] crate::estimation::EstimationError),
    #[error("invalid mission setup: {0}")]
    Setup(String),
}

/// Should the supervisor commit to stopping for route entry `next_entry`?
///
/// Fires when the believed distance to the feature has closed to the trigger
/// distance — overshoot included, there is no point driving on — and the
/// belief is sharp enough to trust.  A soft belief must first contract via
/// rangefinder returns; triggering on a vague belief is how a robot parks
/// itself a meter short of nothing.
pub fn junction_interrupt(
    summary: &BeliefSummary,
    map: &PipeMap,
    next_entry: usize,
    trigger_distance: f64,
    std_gate: f64,
) -> bool {
    let Some(feature_start) = map.feature_start(next_entry) else {
        return false;
    };
    let gap = feature_start - summary.mean;
    gap <= trigger_distance && summary.std <= std_gate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipe_map::{single_feature_map, DesiredTurn, FeatureKind};

    fn summary(mean: f64, std: f64) -> BeliefSummary {
        BeliefSummary {
            mean,
            std,
            ess: 100.0,
        }
    }

    #[test]
    fn interrupt_requires_closeness_and_confidence() {
        let map = single_feature_map(6.0, FeatureKind::Bend, DesiredTurn::PhiPositive, 2.0);
        let trig = 0.3556;
        // Far away: no.
        assert!(!junction_interrupt(
            &summary(3.0, 0.02),
            &map,
            0,
            trig,
            0.15
        ));
        // Close but vague: no.
        assert!(!junction_interrupt(&summary(5.8, 0.5), &map, 0, trig, 0.15));
        // Close and sharp: yes.
        assert!(junction_interrupt(&summary(5.7, 0.02), &map, 0, trig, 0.15));
        // Believed overshoot still triggers.
        assert!(junction_interrupt(&summary(6.1, 0.02), &map, 0, trig, 0.15));
    }

    #[test]
    fn interrupt_needs_a_real_entry() {
        let map = single_feature_map(6.0, FeatureKind::Bend, DesiredTurn::PhiPositive, 2.0);
        assert!(!junction_interrupt(
            &summary(5.8, 0.01),
            &map,
            1,
            0.3556,
            0.15
        ));
    }

    #[test]
    fn phase_labels_are_stable() {
        for (phase, label) in [
            (NavPhase::Cruise, "cruise"),
            (NavPhase::Hold, "hold"),
            (NavPhase::Steer, "steer"),
            (NavPhase::Settle, "settle"),
            (NavPhase::Done, "done"),
            (NavPhase::Fault, "fault"),
        ] {
            assert_eq!(phase.as_str(), label);
        }
    }

    #[test]
    fn default_config_is_coherent() {
        let c = MissionConfig::default();
        assert!(c.trigger_distance > 0.0);
        assert!(c.rotation_tolerance < c.settle_threshold);
        assert!(c.settle_threshold < c.off_axis_bound);
        assert!(c.cruise_speed > 0.0 && c.max_mission_time > 0.0);
    }
}
