//! Scenario configuration: one declarative TOML file.
//!
//! Every field has a default, so an empty file is a valid scenario (a single
//! 10 m straight of 14-in bore and nothing to do but drive it).  Quantities
//! are written with their units — `"14 in"`, `"46 rpm"`, `"0.5 m/s"` — and
//! normalized on load; bare numbers are taken in the base unit of the field.
//! Unknown keys pass silently unless strict mode is on, which rejects them
//! by dotted path.

use std::fmt;

use serde::Deserialize;
use thiserror::Error;

use inpipe_core::control::{LqrWeights, PidGains};
use inpipe_core::dynamics::RobotParams;
use inpipe_core::energy::OperatingPoint;
use inpipe_core::estimation::{ImuNoise, MahonyGains, PfConfig, UltrasonicModel};
use inpipe_core::navigation::{MissionConfig, MissionSetup, SensorConfig, TurnSpeeds};
use inpipe_core::pipe_map::{ConfigEntry, DesiredTurn, FeatureKind, PipeMap, PipeSegment};

#[derive(Debug, Error)]
pub enum ConfigError {
    /// Malformed TOML or a value of the wrong shape; carries the parser's
    /// line/column context.
    #[error("config: {0}")]
    Parse(String),
    /// Strict mode found a key the schema does not know.
    #[error("config: unknown key `{0}`")]
    UnknownKey(String),
    /// A quantity string could not be read in the field's dimension.
    #[error("config: {field}: cannot read {text:?} as {expected}")]
    Unit {
        field: String,
        text: String,
        expected: &'static str,
    },
    /// A structurally required value is missing.
    #[error("config: {0}")]
    Missing(String),
    /// The segment/entry tables do not describe a valid map.
    #[error("config: [[segment]]/[[entry]] tables: {0}")]
    Map(#[from] inpipe_core::pipe_map::MapError),
}

// --- quantities -----------------------------------------------------------

/// A config value that is either a bare number (base unit) or a string with
/// a unit suffix.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Raw {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, Copy)]
enum Dim {
    Length,
    Speed,
    AngularSpeed,
    Angle,
    Pressure,
    Time,
    Current,
}

impl Dim {
    fn name(self) -> &'static str {
        match self {
            Dim::Length => "a length (m, cm, mm, in, ft)",
            Dim::Speed => "a speed (m/s, cm/s, mm/s, in/s)",
            Dim::AngularSpeed => "an angular speed (rad/s, rpm, deg/s)",
            Dim::Angle => "an angle (rad, deg)",
            Dim::Pressure => "a pressure (kPa, Pa, bar)",
            Dim::Time => "a time (s, ms, min, h)",
            Dim::Current => "a current (A, mA)",
        }
    }

    /// Scale from the given unit into the field's base unit.
    fn scale(self, unit: &str) -> Option<f64> {
        let u = unit.to_ascii_lowercase();
        match self {
            Dim::Length => match u.as_str() {
                "m" => Some(1.0),
                "cm" => Some(0.01),
                "mm" => Some(0.001),
                "in" | "inch" | "inches" => Some(0.0254),
                "ft" => Some(0.3048),
                _ => None,
            },
            Dim::Speed => match u.as_str() {
                "m/s" => Some(1.0),
                "cm/s" => Some(0.01),
                "mm/s" => Some(0.001),
                "in/s" => Some(0.0254),
                _ => None,
            },
            Dim::AngularSpeed => match u.as_str() {
                "rad/s" => Some(1.0),
                "rpm" => Some(std::f64::consts::TAU / 60.0),
                "deg/s" => Some(std::f64::consts::PI / 180.0),
                _ => None,
            },
            Dim::Angle => match u.as_str() {
                "rad" => Some(1.0),
                "deg" | "°" => Some(std::f64::consts::PI / 180.0),
                _ => None,
            },
            // Base unit is kPa, matching the measured drag tables.
            Dim::Pressure => match u.as_str() {
                "kpa" => Some(1.0),
                "pa" => Some(0.001),
                "bar" => Some(100.0),
                "mpa" => Some(1000.0),
                _ => None,
            },
            Dim::Time => match u.as_str() {
                "s" => Some(1.0),
                "ms" => Some(0.001),
                "min" => Some(60.0),
                "h" => Some(3600.0),
                _ => None,
            },
            Dim::Current => match u.as_str() {
                "a" => Some(1.0),
                "ma" => Some(0.001),
                _ => None,
            },
        }
    }
}

fn quantity(raw: &Raw, dim: Dim, field: &str) -> Result<f64, ConfigError> {
    let err = |text: &str| ConfigError::Unit {
        field: field.to_string(),
        text: text.to_string(),
        expected: dim.name(),
    };
    match raw {
        Raw::Num(x) => Ok(*x),
        Raw::Text(s) => {
            let s = s.trim();
            let split = s
                .find(|c: char| !(c.is_ascii_digit() || "+-.eE".contains(c)))
                .unwrap_or(s.len());
            // A lone exponent letter belongs to the unit, not the number
            // ("2e" would otherwise eat a trailing unit starting with e).
            let (num_part, unit_part) = s.split_at(split);
            let value: f64 = num_part.trim().parse().map_err(|_| err(s))?;
            let unit = unit_part.trim();
            if unit.is_empty() {
                return Ok(value);
            }
            let scale = dim.scale(unit).ok_or_else(|| err(s))?;
            Ok(value * scale)
        }
    }
}

/// Parse a standalone length argument ("0.3556", "14 in").
pub fn parse_length_arg(text: &str, field: &str) -> Result<f64, ConfigError> {
    quantity(&Raw::Text(text.to_string()), Dim::Length, field)
}

fn opt_quantity(
    raw: &Option<Raw>,
    dim: Dim,
    field: &str,
    default: f64,
) -> Result<f64, ConfigError> {
    match raw {
        Some(r) => quantity(r, dim, field),
        None => Ok(default),
    }
}

// --- raw schema -----------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawScenario {
    seed: Option<u64>,
    out: Option<String>,
    output_every: Option<Raw>,
    start: Option<Raw>,
    extraction: Option<Raw>,
    robot: RawRobot,
    mission: RawMission,
    control: RawControl,
    sensors: RawSensors,
    energy: RawEnergy,
    #[serde(rename = "segment")]
    segments: Vec<RawSegment>,
    #[serde(rename = "entry")]
    entries: Vec<RawEntry>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawRobot {
    mass: Option<f64>,
    wheel_radius: Option<Raw>,
    battery_capacity: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawMission {
    cruise_speed: Option<Raw>,
    trigger_distance: Option<Raw>,
    trigger_std_gate: Option<Raw>,
    start_belief_sigma: Option<Raw>,
    rotation_tolerance: Option<Raw>,
    off_axis_bound: Option<Raw>,
    settle_threshold: Option<Raw>,
    steer_timeout: Option<Raw>,
    settle_timeout: Option<Raw>,
    retry_hold_time: Option<Raw>,
    max_mission_time: Option<Raw>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawControl {
    q: Option<[f64; 4]>,
    r: Option<[f64; 3]>,
    kp: Option<f64>,
    ki: Option<f64>,
    kd: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawSensors {
    accel_sigma: Option<f64>,
    gyro_sigma: Option<f64>,
    gyro_bias: Option<[f64; 3]>,
    max_range: Option<Raw>,
    noise_sigma: Option<Raw>,
    update_period: Option<Raw>,
    latency: Option<Raw>,
    mahony_kp: Option<f64>,
    mahony_ki: Option<f64>,
    particles: Option<usize>,
    odometry_noise_frac: Option<f64>,
    odometry_noise_floor: Option<Raw>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawEnergy {
    ground_speed: Option<Raw>,
    flow: Option<Raw>,
    pressure: Option<Raw>,
    inclination: Option<Raw>,
    avionics: Option<Raw>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawSegment {
    kind: Option<String>,
    length: Option<Raw>,
    diameter: Option<Raw>,
    inclination: Option<Raw>,
    pressure: Option<Raw>,
    flow: Option<Raw>,
    inner_radius: Option<Raw>,
    outer_radius: Option<Raw>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RawEntry {
    kind: Option<String>,
    turn: Option<String>,
    dwell: Option<Raw>,
    omega_max: Option<Raw>,
    omega_min: Option<Raw>,
    center_speed: Option<Raw>,
}

// --- strict key walk ------------------------------------------------------

const ROOT_KEYS: &[&str] = &[
    "seed",
    "out",
    "output_every",
    "start",
    "extraction",
    "robot",
    "mission",
    "control",
    "sensors",
    "energy",
    "segment",
    "entry",
];
const ROBOT_KEYS: &[&str] = &["mass", "wheel_radius", "battery_capacity"];
const MISSION_KEYS: &[&str] = &[
    "cruise_speed",
    "trigger_distance",
    "trigger_std_gate",
    "start_belief_sigma",
    "rotation_tolerance",
    "off_axis_bound",
    "settle_threshold",
    "steer_timeout",
    "settle_timeout",
    "retry_hold_time",
    "max_mission_time",
];
const CONTROL_KEYS: &[&str] = &["q", "r", "kp", "ki", "kd"];
const SENSOR_KEYS: &[&str] = &[
    "accel_sigma",
    "gyro_sigma",
    "gyro_bias",
    "max_range",
    "noise_sigma",
    "update_period",
    "latency",
    "mahony_kp",
    "mahony_ki",
    "particles",
    "odometry_noise_frac",
    "odometry_noise_floor",
];
const ENERGY_KEYS: &[&str] = &[
    "ground_speed",
    "flow",
    "pressure",
    "inclination",
    "avionics",
];
const SEGMENT_KEYS: &[&str] = &[
    "kind",
    "length",
    "diameter",
    "inclination",
    "pressure",
    "flow",
    "inner_radius",
    "outer_radius",
];
const ENTRY_KEYS: &[&str] = &[
    "kind",
    "turn",
    "dwell",
    "omega_max",
    "omega_min",
    "center_speed",
];

fn check_table(value: &toml::Value, allowed: &[&str], path: &str) -> Result<(), ConfigError> {
    let Some(table) = value.as_table() else {
        return Ok(());
    };
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            let full = if path.is_empty() {
                key.clone()
            } else {
                format!("{path}.{key}")
            };
            return Err(ConfigError::UnknownKey(full));
        }
    }
    Ok(())
}

fn check_array_of_tables(
    value: &toml::Value,
    allowed: &[&str],
    path: &str,
) -> Result<(), ConfigError> {
    if let Some(items) = value.as_array() {
        for (i, item) in items.iter().enumerate() {
            check_table(item, allowed, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}

fn strict_check(value: &toml::Value) -> Result<(), ConfigError> {
    check_table(value, ROOT_KEYS, "")?;
    let Some(table) = value.as_table() else {
        return Ok(());
    };
    for (key, allowed) in [
        ("robot", ROBOT_KEYS),
        ("mission", MISSION_KEYS),
        ("control", CONTROL_KEYS),
        ("sensors", SENSOR_KEYS),
        ("energy", ENERGY_KEYS),
    ] {
        if let Some(sub) = table.get(key) {
            check_table(sub, allowed, key)?;
        }
    }
    if let Some(segs) = table.get("segment") {
        check_array_of_tables(segs, SEGMENT_KEYS, "segment")?;
    }
    if let Some(entries) = table.get("entry") {
        check_array_of_tables(entries, ENTRY_KEYS, "entry")?;
    }
    Ok(())
}

// --- resolved scenario ----------------------------------------------------

/// A fully resolved scenario: SI quantities, defaults applied, map built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub setup: MissionSetup,
    /// Output directory from the file; the command line can override it.
    pub out_dir: Option<String>,
    /// Time between emitted trace rows [s].
    pub output_every: f64,
    /// Cruise condition for the battery-budget report.
    pub operating_point: OperatingPoint,
    /// Non-propulsion draw for the battery-budget report [A].
    pub avionics_current: f64,
    /// True when no `[[segment]]` table appeared and the built-in one-straight
    /// map is in use.
    pub default_map: bool,
}

impl Scenario {
    /// Trace decimation factor for the configured output cadence.
    pub fn trace_stride(&self) -> usize {
        (self.output_every / 0.01).round().max(1.0) as usize
    }
}

fn parse_turn(text: &str, field: &str) -> Result<DesiredTurn, ConfigError> {
    match text.to_ascii_lowercase().as_str() {
        "straight" | "straight-through" | "none" => Ok(DesiredTurn::StraightThrough),
        "phi+" => Ok(DesiredTurn::PhiPositive),
        "phi-" => Ok(DesiredTurn::PhiNegative),
        "psi+" => Ok(DesiredTurn::PsiPositive),
        "psi-" => Ok(DesiredTurn::PsiNegative),
        _ => Err(ConfigError::Unit {
            field: field.to_string(),
            text: text.to_string(),
            expected: "one of straight, phi+, phi-, psi+, psi-",
        }),
    }
}

fn parse_feature_kind(text: &str, field: &str) -> Result<FeatureKind, ConfigError> {
    match text.to_ascii_lowercase().as_str() {
        "bend" => Ok(FeatureKind::Bend),
        "tee" | "t-junction" | "tjunction" => Ok(FeatureKind::TJunction),
        _ => Err(ConfigError::Unit {
            field: field.to_string(),
            text: text.to_string(),
            expected: "one of bend, tee",
        }),
    }
}

fn build_segment(raw: &RawSegment, idx: usize) -> Result<PipeSegment, ConfigError> {
    let at = |k: &str| format!("segment[{idx}].{k}");
    let kind = raw
        .kind
        .as_deref()
        .unwrap_or("straight")
        .to_ascii_lowercase();
    let diameter = opt_quantity(
        &raw.diameter,
        Dim::Length,
        &at("diameter"),
        inpipe_core::units::inches(14.0),
    )?;
    let mut seg = match kind.as_str() {
        "straight" => {
            let Some(length) = &raw.length else {
                return Err(ConfigError::Missing(format!(
                    "segment[{idx}]: a straight needs a length"
                )));
            };
            PipeSegment::straight(quantity(length, Dim::Length, &at("length"))?, diameter)
        }
        "bend" | "tee" | "t-junction" | "tjunction" => {
            let inner = opt_quantity(
                &raw.inner_radius,
                Dim::Length,
                &at("inner_radius"),
                diameter,
            )?;
            let mut seg = if kind == "bend" {
                PipeSegment::bend(inner, diameter)
            } else {
                PipeSegment::tee(inner, diameter)
            };
            if let Some(outer) = &raw.outer_radius {
                seg.outer_radius = quantity(outer, Dim::Length, &at("outer_radius"))?;
            }
            if let Some(length) = &raw.length {
                seg.length = quantity(length, Dim::Length, &at("length"))?;
            }
            seg
        }
        other => {
            return Err(ConfigError::Unit {
                field: at("kind"),
                text: other.to_string(),
                expected: "one of straight, bend, tee",
            });
        }
    };
    seg.inclination = opt_quantity(&raw.inclination, Dim::Angle, &at("inclination"), 0.0)?;
    seg.line_pressure = opt_quantity(
        &raw.pressure,
        Dim::Pressure,
        &at("pressure"),
        seg.line_pressure,
    )?;
    seg.flow_velocity = opt_quantity(&raw.flow, Dim::Speed, &at("flow"), 0.0)?;
    Ok(seg)
}

/// Parse a scenario file.  `strict` additionally rejects unknown keys.
pub fn parse_config(text: &str, strict: bool) -> Result<Scenario, ConfigError> {
    let value: toml::Value = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    if strict {
        strict_check(&value)?;
    }
    let raw: RawScenario =
        RawScenario::deserialize(value).map_err(|e| ConfigError::Parse(e.to_string()))?;

    // Robot.
    let mut params = RobotParams::default();
    if let Some(m) = raw.robot.mass {
        params.mass = m;
    }
    params.wheel_radius = opt_quantity(
        &raw.robot.wheel_radius,
        Dim::Length,
        "robot.wheel_radius",
        params.wheel_radius,
    )?;
    if let Some(c) = raw.robot.battery_capacity {
        params.battery_capacity = c;
    }

    // Map: segments, or the built-in one-straight map.
    let default_map = raw.segments.is_empty();
    let segments = if default_map {
        vec![PipeSegment::straight(
            10.0,
            inpipe_core::units::inches(14.0),
        )]
    } else {
        raw.segments
            .iter()
            .enumerate()
            .map(|(i, s)| build_segment(s, i))
            .collect::<Result<Vec<_>, _>>()?
    };

    // Route entries; kind defaults to the matching feature's own kind.
    let feature_kinds: Vec<FeatureKind> = segments
        .iter()
        .filter(|s| s.is_feature())
        .map(|s| match s.kind {
            inpipe_core::pipe_map::SegmentKind::Bend => FeatureKind::Bend,
            _ => FeatureKind::TJunction,
        })
        .collect();
    let mut entries = Vec::with_capacity(raw.entries.len());
    let mut turn_speeds = Vec::with_capacity(raw.entries.len());
    for (i, e) in raw.entries.iter().enumerate() {
        let at = |k: &str| format!("entry[{i}].{k}");
        let kind = match &e.kind {
            Some(text) => parse_feature_kind(text, &at("kind"))?,
            None => feature_kinds.get(i).copied().ok_or_else(|| {
                ConfigError::Missing(format!(
                    "entry[{i}]: no matching feature segment to take a kind from"
                ))
            })?,
        };
        let turn = match &e.turn {
            Some(text) => parse_turn(text, &at("turn"))?,
            None => DesiredTurn::StraightThrough,
        };
        let mut entry = ConfigEntry::new(kind, turn);
        if let Some(dwell) = &e.dwell {
            entry = entry.with_dwell(quantity(dwell, Dim::Time, &at("dwell"))?);
        }
        entries.push(entry);

        let speeds = match (&e.omega_max, &e.omega_min, &e.center_speed) {
            (Some(hi), Some(lo), _) => Some(TurnSpeeds::Explicit {
                omega_max: quantity(hi, Dim::AngularSpeed, &at("omega_max"))?,
                omega_min: quantity(lo, Dim::AngularSpeed, &at("omega_min"))?,
            }),
            (None, None, Some(v)) => Some(TurnSpeeds::FromCenterSpeed(quantity(
                v,
                Dim::Speed,
                &at("center_speed"),
            )?)),
            (None, None, None) => None,
            _ => {
                return Err(ConfigError::Missing(format!(
                    "entry[{i}]: omega_max and omega_min come as a pair"
                )));
            }
        };
        turn_speeds.push(speeds);
    }

    let mut map = PipeMap::build(segments, entries)?;
    if let Some(ex) = &raw.extraction {
        map = map.with_extraction(quantity(ex, Dim::Length, "extraction")?)?;
    }

    // Mission tuning over the defaults.
    let mut config = MissionConfig::default();
    let m = &raw.mission;
    config.cruise_speed = opt_quantity(
        &m.cruise_speed,
        Dim::Speed,
        "mission.cruise_speed",
        config.cruise_speed,
    )?;
    config.trigger_distance = opt_quantity(
        &m.trigger_distance,
        Dim::Length,
        "mission.trigger_distance",
        config.trigger_distance,
    )?;
    config.trigger_std_gate = opt_quantity(
        &m.trigger_std_gate,
        Dim::Length,
        "mission.trigger_std_gate",
        config.trigger_std_gate,
    )?;
    config.start_belief_sigma = opt_quantity(
        &m.start_belief_sigma,
        Dim::Length,
        "mission.start_belief_sigma",
        config.start_belief_sigma,
    )?;
    config.rotation_tolerance = opt_quantity(
        &m.rotation_tolerance,
        Dim::Angle,
        "mission.rotation_tolerance",
        config.rotation_tolerance,
    )?;
    config.off_axis_bound = opt_quantity(
        &m.off_axis_bound,
        Dim::Angle,
        "mission.off_axis_bound",
        config.off_axis_bound,
    )?;
    config.settle_threshold = opt_quantity(
        &m.settle_threshold,
        Dim::Angle,
        "mission.settle_threshold",
        config.settle_threshold,
    )?;
    config.steer_timeout = opt_quantity(
        &m.steer_timeout,
        Dim::Time,
        "mission.steer_timeout",
        config.steer_timeout,
    )?;
    config.settle_timeout = opt_quantity(
        &m.settle_timeout,
        Dim::Time,
        "mission.settle_timeout",
        config.settle_timeout,
    )?;
    config.retry_hold_time = opt_quantity(
        &m.retry_hold_time,
        Dim::Time,
        "mission.retry_hold_time",
        config.retry_hold_time,
    )?;
    config.max_mission_time = opt_quantity(
        &m.max_mission_time,
        Dim::Time,
        "mission.max_mission_time",
        config.max_mission_time,
    )?;
    // Per-entry wheel plans; entries without one fall back to the engine's
    // cruise-speed derivation.
    config.turn_speeds = turn_speeds
        .into_iter()
        .map(|s| s.unwrap_or(TurnSpeeds::FromCenterSpeed(config.cruise_speed)))
        .collect();
    if let Some(seed) = raw.seed {
        config.seed = seed;
    }

    let c = &raw.control;
    let mut weights = LqrWeights::default();
    if let Some(q) = c.q {
        weights.q = q;
    }
    if let Some(r) = c.r {
        weights.r = r;
    }
    config.lqr_weights = weights;
    let mut pid = PidGains::default();
    if let Some(kp) = c.kp {
        pid.k_p = kp;
    }
    if let Some(ki) = c.ki {
        pid.k_i = ki;
    }
    if let Some(kd) = c.kd {
        pid.k_d = kd;
    }
    config.pid = pid;

    // Sensors.
    let s = &raw.sensors;
    let mut imu = ImuNoise::default();
    if let Some(a) = s.accel_sigma {
        imu.accel_sigma = a;
    }
    if let Some(g) = s.gyro_sigma {
        imu.gyro_sigma = g;
    }
    if let Some(b) = s.gyro_bias {
        imu.gyro_bias = nalgebra_bias(b);
    }
    let mut ultrasonic = UltrasonicModel::default();
    ultrasonic.max_range = opt_quantity(
        &s.max_range,
        Dim::Length,
        "sensors.max_range",
        ultrasonic.max_range,
    )?;
    ultrasonic.noise_sigma = opt_quantity(
        &s.noise_sigma,
        Dim::Length,
        "sensors.noise_sigma",
        ultrasonic.noise_sigma,
    )?;
    ultrasonic.update_period = opt_quantity(
        &s.update_period,
        Dim::Time,
        "sensors.update_period",
        ultrasonic.update_period,
    )?;
    ultrasonic.latency =
        opt_quantity(&s.latency, Dim::Time, "sensors.latency", ultrasonic.latency)?;
    let mut mahony = MahonyGains::default();
    if let Some(kp) = s.mahony_kp {
        mahony.kp = kp;
    }
    if let Some(ki) = s.mahony_ki {
        mahony.ki = ki;
    }
    let mut pf = PfConfig::default();
    if let Some(n) = s.particles {
        pf.particle_count = n;
    }
    if let Some(f) = s.odometry_noise_frac {
        pf.odometry_noise_frac = f;
    }
    pf.odometry_noise_floor = opt_quantity(
        &s.odometry_noise_floor,
        Dim::Length,
        "sensors.odometry_noise_floor",
        pf.odometry_noise_floor,
    )?;

    let mut setup = MissionSetup::new(map);
    setup.params = params;
    setup.start_s = opt_quantity(&raw.start, Dim::Length, "start", 0.0)?;
    setup.config = config;
    setup.sensors = SensorConfig {
        imu,
        ultrasonic,
        mahony,
        pf,
    };

    // Battery-budget operating point.
    let e = &raw.energy;
    let operating_point = OperatingPoint {
        ground_speed: opt_quantity(&e.ground_speed, Dim::Speed, "energy.ground_speed", 0.5)?,
        flow_velocity: opt_quantity(&e.flow, Dim::Speed, "energy.flow", -0.7)?,
        line_pressure: opt_quantity(&e.pressure, Dim::Pressure, "energy.pressure", 100.0)?,
        inclination: opt_quantity(&e.inclination, Dim::Angle, "energy.inclination", 0.0)?,
    };
    let avionics_current = opt_quantity(&e.avionics, Dim::Current, "energy.avionics", 0.0)?;

    Ok(Scenario {
        setup,
        out_dir: raw.out,
        output_every: opt_quantity(&raw.output_every, Dim::Time, "output_every", 0.01)?,
        operating_point,
        avionics_current,
        default_map,
    })
}

fn nalgebra_bias(b: [f64; 3]) -> nalgebra::Vector3<f64> {
    nalgebra::Vector3::new(b[0], b[1], b[2])
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let map = &self.setup.map;
        write!(
            f,
            "{} segments, {:.2} m of pipe, {} route entries, seed {}",
            map.segments().len(),
            map.total_arclength(),
            map.ct().len(),
            self.setup.config.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use inpipe_core::units::inches;

    #[test]
    fn empty_config_is_the_default_scenario() {
        let sc = parse_config("", true).unwrap();
        assert!(sc.default_map);
        assert_eq!(sc.setup.map.segments().len(), 1);
        assert_eq!(sc.setup.map.ct().len(), 0);
        assert_eq!(sc.setup.config.seed, 0);
        assert_eq!(sc.setup.config.cruise_speed, 0.1);
        assert_eq!(sc.trace_stride(), 1);
        assert_eq!(sc.operating_point.relative_water_speed(), 1.2);
    }

    #[test]
    fn unit_suffixes_are_normalized() {
        let sc = parse_config(
            r#"
            start = "50 cm"
            [mission]
            cruise_speed = "20 cm/s"
            trigger_distance = "14 in"
            rotation_tolerance = "2 deg"
            steer_timeout = "1 min"
            [[segment]]
            length = "4 m"
            diameter = "14 in"
            "#,
            true,
        )
        .unwrap();
        assert!((sc.setup.start_s - 0.5).abs() < 1e-12);
        assert!((sc.setup.config.cruise_speed - 0.2).abs() < 1e-12);
        assert!((sc.setup.config.trigger_distance - inches(14.0)).abs() < 1e-12);
        assert!((sc.setup.config.rotation_tolerance - 2f64.to_radians()).abs() < 1e-12);
        assert!((sc.setup.config.steer_timeout - 60.0).abs() < 1e-12);
        assert!((sc.setup.map.segments()[0].diameter - 0.3556).abs() < 1e-9);
    }

    #[test]
    fn bare_numbers_are_base_units() {
        let sc = parse_config(
            r#"
            [[segment]]
            length = 4
            diameter = 0.3556
            pressure = 240
            "#,
            true,
        )
        .unwrap();
        let seg = &sc.setup.map.segments()[0];
        assert_eq!(seg.length, 4.0);
        assert_eq!(seg.line_pressure, 240.0);
    }

    #[test]
    fn wrong_unit_is_rejected_with_the_field_name() {
        let err = parse_config(
            r#"
            [mission]
            cruise_speed = "3 kg"
            "#,
            false,
        )
        .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("mission.cruise_speed"), "{text}");
        assert!(text.contains("speed"), "{text}");
    }

    #[test]
    fn strict_mode_rejects_unknown_keys_by_path() {
        let text = r#"
            [mission]
            cruise_sped = "0.1 m/s"
        "#;
        let err = parse_config(text, true).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey(ref k) if k == "mission.cruise_sped"));
        // The same file passes without strict mode (the typo is ignored).
        assert!(parse_config(text, false).is_ok());
    }

    #[test]
    fn route_count_mismatch_carries_config_context() {
        let err = parse_config(
            r#"
            [[segment]]
            length = "4 m"
            [[entry]]
            kind = "tee"
            "#,
            true,
        )
        .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("[[segment]]/[[entry]]"), "{text}");
    }

    #[test]
    fn full_route_parses_into_a_mission() {
        let sc = parse_config(
            r#"
            seed = 42
            start = "2 m"
            [[segment]]
            length = "4 m"
            diameter = "14 in"
            [[segment]]
            kind = "tee"
            diameter = "14 in"
            inner_radius = "14 in"
            [[segment]]
            length = "2 m"
            diameter = "14 in"
            [[entry]]
            turn = "phi+"
            dwell = "0.5 s"
            omega_max = "97 rpm"
            omega_min = "49 rpm"
            "#,
            true,
        )
        .unwrap();
        assert_eq!(sc.setup.config.seed, 42);
        assert_eq!(sc.setup.map.ct().len(), 1);
        assert_eq!(sc.setup.map.ct()[0].turn, DesiredTurn::PhiPositive);
        match sc.setup.config.turn_speeds[0] {
            TurnSpeeds::Explicit { omega_max, .. } => {
                assert!((omega_max - inpipe_core::units::rpm(97.0)).abs() < 1e-12);
            }
            other => panic!("expected explicit speeds, got {other:?}"),
        }
    }

    #[test]
    fn entry_kind_is_inferred_from_the_feature() {
        let sc = parse_config(
            r#"
            [[segment]]
            length = "4 m"
            [[segment]]
            kind = "bend"
            [[segment]]
            length = "2 m"
            [[entry]]
            turn = "phi-"
            "#,
            true,
        )
        .unwrap();
        assert_eq!(sc.setup.map.ct()[0].kind, FeatureKind::Bend);
    }

    #[test]
    fn malformed_toml_reports_position() {
        let err = parse_config("seed = [unclosed", false).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
        assert!(err.to_string().contains("line"), "{err}");
    }
}
