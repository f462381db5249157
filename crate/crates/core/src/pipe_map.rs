//! Pipeline map: an ordered path of segments plus the feature list.
//!
//! The map is the single planned traversal route, not a network graph. Each
//! non-straight segment (bend or T-junction) pairs with one [`ConfigEntry`]
//! describing what the robot should do there; the localizer uses the same map
//! to predict range measurements ahead of the robot.

use crate::units;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Straight,
    Bend,
    TJunction,
}

/// Wheel-diameter adaptability range of the chassis, meters (9–20 in).
pub const MIN_ADAPTABLE_DIAMETER: f64 = 0.2286;
pub const MAX_ADAPTABLE_DIAMETER: f64 = 0.508;

/// Drag-table validity range for line pressure, kPa.
pub const MIN_LINE_PRESSURE: f64 = 100.0;
pub const MAX_LINE_PRESSURE: f64 = 500.0;

/// One piece of the traversal path.
///
/// `length` is arclength along the robot's path; for 90° features built by
/// [`PipeSegment::bend`] / [`PipeSegment::tee`] it is the quarter-circle at
/// the pipe centerline, `(π/2)·(R_i + D/2)`.
///
/// `flow_velocity` is signed along the path: positive opposes the robot's
/// forward direction (the usual upstream-inspection case).
#[derive(Debug, Clone, Copy)]
pub struct PipeSegment {
    pub kind: SegmentKind,
    pub length: f64,
    pub diameter: f64,
    pub inclination: f64,
    /// Turn radii; zero for straight segments.
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// kPa; clamped to the drag-model domain at map build.
    pub line_pressure: f64,
    pub flow_velocity: f64,
}

impl PipeSegment {
    pub fn straight(length: f64, diameter: f64) -> Self {
        PipeSegment {
            kind: SegmentKind::Straight,
            length,
            diameter,
            inclination: 0.0,
            inner_radius: 0.0,
            outer_radius: 0.0,
            line_pressure: MIN_LINE_PRESSURE,
            flow_velocity: 0.0,
        }
    }

    /// 90° bend with the conventional `R_o = 2·R_i` wall radii.
    pub fn bend(inner_radius: f64, diameter: f64) -> Self {
        Self::bend_with_radii(inner_radius, 2.0 * inner_radius, diameter)
    }

    pub fn bend_with_radii(inner_radius: f64, outer_radius: f64, diameter: f64) -> Self {
        PipeSegment {
            kind: SegmentKind::Bend,
            length: quarter_arc(inner_radius, diameter),
            diameter,
            inclination: 0.0,
            inner_radius,
            outer_radius,
            line_pressure: MIN_LINE_PRESSURE,
            flow_velocity: 0.0,
        }
    }

    /// 90° T-junction. Path length assumes the turning branch; a map whose
    /// config entry says `StraightThrough` gets the length rewritten to the
    /// bore diameter at build time (the robot just crosses the opening).
    pub fn tee(inner_radius: f64, diameter: f64) -> Self {
        PipeSegment {
            kind: SegmentKind::TJunction,
            ..Self::bend_with_radii(inner_radius, 2.0 * inner_radius, diameter)
        }
    }

    pub fn with_inclination(mut self, inclination: f64) -> Self {
        self.inclination = inclination;
        self
    }

    pub fn with_pressure(mut self, line_pressure: f64) -> Self {
        self.line_pressure = line_pressure;
        self
    }

    pub fn with_flow(mut self, flow_velocity: f64) -> Self {
        self.flow_velocity = flow_velocity;
        self
    }

    pub fn is_feature(&self) -> bool {
        self.kind != SegmentKind::Straight
    }
}

/// Robot-path arclength of a 90° feature at the pipe centerline.
fn quarter_arc(inner_radius: f64, diameter: f64) -> f64 {
    std::f64::consts::FRAC_PI_2 * (inner_radius + diameter / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Bend,
    TJunction,
}

/// Turn the robot performs at a feature, named by the body axis it rotates
/// about (y = pitch-like `phi`, z = yaw-like `psi`) and the sign of the
/// 90° target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesiredTurn {
    PhiPositive,
    PhiNegative,
    PsiPositive,
    PsiNegative,
    /// Cross the opening without turning; only meaningful at a T-junction.
    StraightThrough,
}

impl DesiredTurn {
    pub fn is_turn(&self) -> bool {
        !matches!(self, DesiredTurn::StraightThrough)
    }

    /// Signed 90° target angle; zero for straight-through.
    pub fn target_angle(&self) -> f64 {
        use std::f64::consts::FRAC_PI_2;
        match self {
            DesiredTurn::PhiPositive | DesiredTurn::PsiPositive => FRAC_PI_2,
            DesiredTurn::PhiNegative | DesiredTurn::PsiNegative => -FRAC_PI_2,
            DesiredTurn::StraightThrough => 0.0,
        }
    }

    pub fn about_phi(&self) -> bool {
        matches!(self, DesiredTurn::PhiPositive | DesiredTurn::PhiNegative)
    }
}

/// What to do at one feature: the expected feature kind, the turn, and how
/// long to dwell for sensing before moving again.
#[derive(Debug, Clone, Copy)]
pub struct ConfigEntry {
    pub kind: FeatureKind,
    pub turn: DesiredTurn,
    pub dwell_time: f64,
}

/// Water-quality sensing takes about a minute at each stop.
pub const DEFAULT_DWELL_TIME: f64 = 60.0;

impl ConfigEntry {
    pub fn new(kind: FeatureKind, turn: DesiredTurn) -> Self {
        ConfigEntry {
            kind,
            turn,
            dwell_time: DEFAULT_DWELL_TIME,
        }
    }

    pub fn with_dwell(mut self, dwell_time: f64) -> Self {
        self.dwell_time = dwell_time;
        self
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("map has no segments")]
    EmptyMap,
    #[error("{features} non-straight segments but {entries} config entries")]
    CountMismatch { features: usize, entries: usize },
    #[error("config entry {entry} expects a {expected:?} but segment {segment} is a {found:?}")]
    KindMismatch {
        entry: usize,
        segment: usize,
        expected: FeatureKind,
        found: SegmentKind,
    },
    #[error("config entry {entry}: a bend cannot be crossed straight-through")]
    IllegalTurn { entry: usize },
    #[error("segment {index}: {what}")]
    InvalidSegment { index: usize, what: &'static str },
    #[error("extraction point {requested} m beyond total arclength {total} m")]
    ExtractionBeyondMap { requested: f64, total: f64 },
    #[error("arclength {s} m outside [0, {total}] m")]
    OutOfRange { s: f64, total: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapWarning {
    /// Diameter outside the 9–20 in chassis adaptability range.
    DiameterOutsideAdaptability { index: usize, diameter: f64 },
    /// Line pressure clamped into the drag-model domain.
    PressureClamped { index: usize, requested: f64 },
}

/// Validated traversal map with precomputed cumulative arclengths.
#[derive(Debug, Clone)]
pub struct PipeMap {
    segments: Vec<PipeSegment>,
    ct: Vec<ConfigEntry>,
    /// Segment index of each feature, in traversal order (parallel to `ct`).
    feature_segments: Vec<usize>,
    /// starts[i] = arclength at which segment i begins; starts[n] = total.
    starts: Vec<f64>,
    extraction_arclength: f64,
    warnings: Vec<MapWarning>,
}

impl PipeMap {
    /// Validate and index a map. Feature segments pair with `ct` entries in
    /// traversal order; straight-through T-junction crossings get their path
    /// length rewritten to the bore diameter.
    pub fn build(segments: Vec<PipeSegment>, ct: Vec<ConfigEntry>) -> Result<Self, MapError> {
        if segments.is_empty() {
            return Err(MapError::EmptyMap);
        }

        let feature_segments: Vec<usize> = segments
            .iter()
            .enumerate()
            .filter(|(_, seg)| seg.is_feature())
            .map(|(i, _)| i)
            .collect();
        if feature_segments.len() != ct.len() {
            return Err(MapError::CountMismatch {
                features: feature_segments.len(),
                entries: ct.len(),
            });
        }

        let mut segments = segments;
        let mut warnings = Vec::new();
        for (entry_idx, (&seg_idx, entry)) in feature_segments.iter().zip(&ct).enumerate() {
            let seg = &mut segments[seg_idx];
            let matches = match entry.kind {
                FeatureKind::Bend => seg.kind == SegmentKind::Bend,
                FeatureKind::TJunction => seg.kind == SegmentKind::TJunction,
            };
            if !matches {
                return Err(MapError::KindMismatch {
                    entry: entry_idx,
                    segment: seg_idx,
                    expected: entry.kind,
                    found: seg.kind,
                });
            }
            if entry.turn == DesiredTurn::StraightThrough {
                if entry.kind == FeatureKind::Bend {
                    return Err(MapError::IllegalTurn { entry: entry_idx });
                }
                seg.length = seg.diameter;
            }
        }

        for (i, seg) in segments.iter_mut().enumerate() {
            if !(seg.length > 0.0) {
                return Err(MapError::InvalidSegment {
                    index: i,
                    what: "length must be positive",
                });
            }
            if !(seg.diameter > 0.0) {
                return Err(MapError::InvalidSegment {
                    index: i,
                    what: "diameter must be positive",
                });
            }
            if !(MIN_ADAPTABLE_DIAMETER..=MAX_ADAPTABLE_DIAMETER).contains(&seg.diameter) {
                warnings.push(MapWarning::DiameterOutsideAdaptability {
                    index: i,
                    diameter: seg.diameter,
                });
            }
            if !(MIN_LINE_PRESSURE..=MAX_LINE_PRESSURE).contains(&seg.line_pressure) {
                warnings.push(MapWarning::PressureClamped {
                    index: i,
                    requested: seg.line_pressure,
                });
                seg.line_pressure = seg
                    .line_pressure
                    .clamp(MIN_LINE_PRESSURE, MAX_LINE_PRESSURE);
            }
        }

        let mut starts = Vec::with_capacity(segments.len() + 1);
        let mut acc = 0.0;
        for seg in &segments {
            starts.push(acc);
            acc += seg.length;
        }
        starts.push(acc);

        Ok(PipeMap {
            segments,
            ct,
            feature_segments,
            extraction_arclength: acc,
            starts,
            warnings,
        })
    }

    /// Move the extraction point (mission end) inward from the map end.
    pub fn with_extraction(mut self, extraction_arclength: f64) -> Result<Self, MapError> {
        let total = self.total_arclength();
        if extraction_arclength > total || extraction_arclength < 0.0 {
            return Err(MapError::ExtractionBeyondMap {
                requested: extraction_arclength,
                total,
            });
        }
        self.extraction_arclength = extraction_arclength;
        Ok(self)
    }

    pub fn total_arclength(&self) -> f64 {
        *self.starts.last().unwrap()
    }

    pub fn extraction_arclength(&self) -> f64 {
        self.extraction_arclength
    }

    pub fn segments(&self) -> &[PipeSegment] {
        &self.segments
    }

    pub fn ct(&self) -> &[ConfigEntry] {
        &self.ct
    }

    pub fn warnings(&self) -> &[MapWarning] {
        &self.warnings
    }

    /// Segment containing arclength `s` plus the offset within it. A shared
    /// boundary belongs to the later segment; `s = total` maps to the end of
    /// the last segment.
    pub fn segment_at(&self, s: f64) -> Result<(&PipeSegment, f64), MapError> {
        let idx = self.segment_index_at(s)?;
        Ok((&self.segments[idx], s - self.starts[idx]))
    }

    pub fn segment_index_at(&self, s: f64) -> Result<usize, MapError> {
        let total = self.total_arclength();
        if !(0.0..=total).contains(&s) {
            return Err(MapError::OutOfRange { s, total });
        }
        if s == total {
            return Ok(self.segments.len() - 1);
        }
        // starts is sorted; find the last start ≤ s.
        let idx = match self.starts[..self.segments.len()]
            .binary_search_by(|start| start.partial_cmp(&s).unwrap())
        {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        Ok(idx)
    }

    /// Arclength from `s` forward to the start of the next feature segment;
    /// `None` once no feature lies ahead. A feature already entered (its
    /// start strictly behind `s`) does not count — the sensor looks forward.
    pub fn distance_to_next_feature(&self, s: f64) -> Result<Option<f64>, MapError> {
        let total = self.total_arclength();
        if !(0.0..=total).contains(&s) {
            return Err(MapError::OutOfRange { s, total });
        }
        for &seg_idx in &self.feature_segments {
            let start = self.starts[seg_idx];
            if start >= s {
                return Ok(Some(start - s));
            }
        }
        Ok(None)
    }

    /// Start arclength of the feature paired with config entry `entry_idx`.
    pub fn feature_start(&self, entry_idx: usize) -> Option<f64> {
        self.feature_segments
            .get(entry_idx)
            .map(|&seg_idx| self.starts[seg_idx])
    }

    /// Segment paired with config entry `entry_idx`.
    pub fn feature_segment(&self, entry_idx: usize) -> Option<&PipeSegment> {
        self.feature_segments
            .get(entry_idx)
            .map(|&seg_idx| &self.segments[seg_idx])
    }

    pub fn segment_start(&self, seg_idx: usize) -> Option<f64> {
        (seg_idx < self.segments.len()).then(|| self.starts[seg_idx])
    }
}

/// The minimal interesting map: straight approach, one 14-in feature, straight exit.
pub fn single_feature_map(
    approach: f64,
    kind: FeatureKind,
    turn: DesiredTurn,
    exit: f64,
) -> PipeMap {
    let d = units::inches(14.0);
    let r_i = units::inches(12.0);
    let feature = match kind {
        FeatureKind::Bend => PipeSegment::bend(r_i, d),
        FeatureKind::TJunction => PipeSegment::tee(r_i, d),
    };
    PipeMap::build(
        vec![
            PipeSegment::straight(approach, d),
            feature,
            PipeSegment::straight(exit, d),
        ],
        vec![ConfigEntry::new(kind, turn)],
    )
    .expect("single-feature map is valid by construction")
}
