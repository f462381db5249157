//! Shared fixtures for the benchmark suite.

use inpipe_core::navigation::MissionSetup;
use inpipe_core::pipe_map::{ConfigEntry, DesiredTurn, FeatureKind, PipeMap, PipeSegment};
use inpipe_core::units::inches;

/// A one-bend route: 4 m lead-in, 12-in elbow turned nose-down, 2 m exit.
/// Small enough to run as a benchmark iteration, real enough to exercise
/// every phase of the mission loop.
pub fn one_bend_setup(seed: u64) -> MissionSetup {
    let d = inches(12.0);
    let map = PipeMap::build(
        vec![
            PipeSegment::straight(4.0, d),
            PipeSegment::bend(inches(12.0), d),
            PipeSegment::straight(2.0, d),
        ],
        vec![ConfigEntry::new(FeatureKind::Bend, DesiredTurn::PhiNegative).with_dwell(0.5)],
    )
    .expect("bench map is well formed");
    let mut setup = MissionSetup::new(map);
    setup.start_s = 2.0;
    setup.config.cruise_speed = 0.2;
    setup.config.seed = seed;
    setup
}
