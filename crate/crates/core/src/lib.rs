//! Deterministic simulator and control/estimation stack for a three-wheel
//! wall-press robot inspecting water distribution pipes.

pub mod control;
pub mod dynamics;
pub mod energy;
pub mod estimation;
pub mod navigation;
pub mod pipe_map;
pub mod units;

pub use control::{
    differential_setpoints, linearize, pid_step, rotation_error_check, solve_care,
    stabilizer_control, torque_voltages, ControlError, DifferentialCommand, GainReport,
    LinearModel, LqrGain, LqrWeights, PidGains, PidState, RotationStatus,
};
pub use dynamics::{
    arm_angle, drag_force, integrate_step, motor_step, rigid_body_derivatives, traction_force,
    BodyAccel, DynamicsError, GravityMomentModel, MotorParams, MotorState, RobotParams, RobotState,
};
pub use energy::{motor_current, per_motor_force, range_estimate, OperatingPoint, RangeReport};
pub use estimation::{
    imu_measure, mahony_update, pf_estimate, pf_init, pf_init_at, pf_update, ultrasonic_measure,
    BeliefState, BeliefSummary, EstimationError, GridFilter, ImuNoise, ImuSample, MahonyGains,
    MahonyState, PfConfig, RangeReading, UltrasonicModel, UltrasonicSensor,
};
pub use navigation::{
    junction_interrupt, mission_run, FaultReason, FeatureEvent, MissionConfig, MissionError,
    MissionReport, MissionSetup, NavPhase, SensorConfig, TraceRow, TurnSpeeds,
};
pub use pipe_map::{
    ConfigEntry, DesiredTurn, FeatureKind, MapError, MapWarning, PipeMap, PipeSegment, SegmentKind,
};
