//! Particle filter over arclength along the pipe map.
//!
//! State is the scalar distance travelled from the insertion point.  Motion
//! updates shift every particle by the odometry increment plus noise;
//! measurement updates reweight by how well each particle explains the
//! rangefinder, including the "no echo" outcome, which softly rules out
//! positions close to a feature.  Resampling runs systematically at the top
//! of every measurement update, so weights never have a chance to collapse
//! between fusions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ultrasonic::{RangeReading, UltrasonicModel};
use super::{normal_cdf, normal_pdf, EstimationError};
use crate::pipe_map::PipeMap;
use rand::SeedableRng;

/// Raw likelihoods at or below this are treated as "cannot explain the
/// measurement"; if every particle lands here the belief is reset.
const LIKELIHOOD_FLOOR: f64 = 1e-12;

/// Tuning knobs the navigation layer uses when driving the filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfConfig {
    /// Number of particles.
    pub particle_count: usize,
    /// Odometry noise as a fraction of the commanded increment.
    pub odometry_noise_frac: f64,
    /// Lower bound on odometry noise [m] so the cloud never freezes.
    pub odometry_noise_floor: f64,
}

impl Default for PfConfig {
    fn default() -> Self {
        Self {
            particle_count: 500,
            odometry_noise_frac: 0.02,
            odometry_noise_floor: 1e-4,
        }
    }
}

impl PfConfig {
    /// Process noise to apply for an odometry increment `u`.
    pub fn odometry_sigma(&self, u: f64) -> f64 {
        (self.odometry_noise_frac * u.abs()).max(self.odometry_noise_floor)
    }
}

/// Particle cloud plus its private random stream.
#[derive(Debug, Clone)]
pub struct BeliefState {
    /// Particle positions [m from insertion].
    pub particles: Vec<f64>,
    /// Normalized weights.
    pub weights: Vec<f64>,
    /// Times the filter had to reset to uniform after losing all mass.
    pub degenerate_resets: u32,
    rng: ChaCha8Rng,
}

/// Moments of the belief.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefSummary {
    /// Weighted mean position [m].
    pub mean: f64,
    /// Weighted standard deviation [m].
    pub std: f64,
    /// Effective sample size, 1 / sum(w^2).
    pub ess: f64,
}

/// Spread `n` particles uniformly over the whole map.
pub fn pf_init(map: &PipeMap, n: usize, seed: u64) -> Result<BeliefState, EstimationError> {
    if n < 2 {
        return Err(EstimationError::InvalidParticleCount(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = map.total_arclength();
    let particles: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * total).collect();
    let weights = vec![1.0 / n as f64; n];
    Ok(BeliefState {
        particles,
        weights,
        degenerate_resets: 0,
        rng,
    })
}

/// Concentrate `n` particles around a known insertion position.
///
/// A robot lowered in at a surveyed arclength starts with far less position
/// uncertainty than a whole-map spread, and on maps where two stretches of
/// pipe echo the same feature distance a uniform cloud can collapse onto the
/// wrong one.  `sigma` is the 1-sigma placement uncertainty; zero trusts
/// `center` exactly (odometry noise spreads the cloud from the first step).
pub fn pf_init_at(
    map: &PipeMap,
    n: usize,
    seed: u64,
    center: f64,
    sigma: f64,
) -> Result<BeliefState, EstimationError> {
    if n < 2 {
        return Err(EstimationError::InvalidParticleCount(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = map.total_arclength();
    let center = center.clamp(0.0, total);
    let particles: Vec<f64> = if sigma > 0.0 {
        let spread = Normal::new(center, sigma).expect("placement sigma must be finite");
        (0..n)
            .map(|_| spread.sample(&mut rng).clamp(0.0, total))
            .collect()
    } else {
        vec![center; n]
    };
    let weights = vec![1.0 / n as f64; n];
    Ok(BeliefState {
        particles,
        weights,
        degenerate_resets: 0,
        rng,
    })
}

fn systematic_resample(belief: &mut BeliefState) {
    let n = belief.particles.len();
    let step = 1.0 / n as f64;
    let start = belief.rng.random::<f64>() * step;
    let mut resampled = Vec::with_capacity(n);
    let mut cumulative = belief.weights[0];
    let mut j = 0;
    for i in 0..n {
        let target = start + i as f64 * step;
        while cumulative < target && j + 1 < n {
            j += 1;
            cumulative += belief.weights[j];
        }
        resampled.push(belief.particles[j]);
    }
    belief.particles = resampled;
    belief.weights.fill(step);
}

fn propagate(belief: &mut BeliefState, u: f64, sigma_u: f64, map: &PipeMap) {
    let total = map.total_arclength();
    if sigma_u > 0.0 {
        let noise = Normal::new(0.0, sigma_u).expect("odometry sigma must be finite");
        for x in belief.particles.iter_mut() {
            *x = (*x + u + noise.sample(&mut belief.rng)).clamp(0.0, total);
        }
    } else {
        for x in belief.particles.iter_mut() {
            *x = (*x + u).clamp(0.0, total);
        }
    }
}

/// Likelihood of a reading given a hypothesized position.
fn likelihood(x: f64, z: &RangeReading, map: &PipeMap, model: &UltrasonicModel) -> f64 {
    // Particles are clamped onto the map, so the query cannot go out of range.
    let distance = map.distance_to_next_feature(x).ok().flatten();
    match z {
        RangeReading::Echo(measured) => match distance {
            Some(d) => normal_pdf(measured - d, model.noise_sigma).max(LIKELIHOOD_FLOOR),
            // No feature ahead of this particle, yet something echoed.
            None => LIKELIHOOD_FLOOR,
        },
        RangeReading::NoEcho => match distance {
            // Probability that a feature at distance d fails to echo: its
            // noisy return lands beyond the horizon.
            Some(d) => {
                normal_cdf((d - model.max_range) / model.noise_sigma).clamp(LIKELIHOOD_FLOOR, 1.0)
            }
            None => 1.0,
        },
    }
}

/// One full filter step: resample, shift by odometry, reweight by the
/// rangefinder reading.
///
/// If no particle can explain the reading the belief resets to uniform over
/// the map and `Degenerate` is returned; the caller decides whether that is
/// fatal (the reset has already happened and the filter remains usable).
pub fn pf_update(
    belief: &mut BeliefState,
    u: f64,
    sigma_u: f64,
    z: &RangeReading,
    map: &PipeMap,
    model: &UltrasonicModel,
) -> Result<(), EstimationError> {
    systematic_resample(belief);
    propagate(belief, u, sigma_u, map);

    let mut max_raw = 0.0f64;
    let mut sum = 0.0;
    for (x, w) in belief.particles.iter().zip(belief.weights.iter_mut()) {
        let raw = likelihood(*x, z, map, model);
        max_raw = max_raw.max(raw);
        *w = raw;
        sum += raw;
    }

    if max_raw <= LIKELIHOOD_FLOOR || sum <= 0.0 {
        let total = map.total_arclength();
        let n = belief.particles.len();
        for x in belief.particles.iter_mut() {
            *x = belief.rng.random::<f64>() * total;
        }
        belief.weights.fill(1.0 / n as f64);
        belief.degenerate_resets += 1;
        return Err(EstimationError::Degenerate);
    }

    for w in belief.weights.iter_mut() {
        *w /= sum;
    }
    Ok(())
}

/// Motion-only step for stretches where the rangefinder is not usable
/// (e.g. while the nose is swinging through a turn).
pub fn pf_predict(belief: &mut BeliefState, u: f64, sigma_u: f64, map: &PipeMap) {
    propagate(belief, u, sigma_u, map);
}

/// Weighted moments of the current cloud.
pub fn pf_estimate(belief: &BeliefState) -> BeliefSummary {
    let mut mean = 0.0;
    let mut w_sq = 0.0;
    for (x, w) in belief.particles.iter().zip(&belief.weights) {
        mean += w * x;
        w_sq += w * w;
    }
    let mut var = 0.0;
    for (x, w) in belief.particles.iter().zip(&belief.weights) {
        var += w * (x - mean).powi(2);
    }
    BeliefSummary {
        mean,
        std: var.max(0.0).sqrt(),
        ess: if w_sq > 0.0 { 1.0 / w_sq } else { 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::ultrasonic::ultrasonic_measure;
    use crate::pipe_map::{single_feature_map, DesiredTurn, FeatureKind};
    use approx::assert_abs_diff_eq;

    fn feature_map(approach: f64, kind: FeatureKind) -> PipeMap {
        let turn = match kind {
            FeatureKind::Bend => DesiredTurn::PhiNegative,
            FeatureKind::TJunction => DesiredTurn::StraightThrough,
        };
        single_feature_map(approach, kind, turn, 2.0)
    }

    fn quiet_model() -> UltrasonicModel {
        UltrasonicModel {
            noise_sigma: 0.01,
            ..UltrasonicModel::default()
        }
    }

    #[test]
    fn init_is_uniform_over_the_map() {
        let map = feature_map(6.0, FeatureKind::Bend);
        let total = map.total_arclength();
        let belief = pf_init(&map, 20_000, 7).unwrap();
        let s = pf_estimate(&belief);
        assert_abs_diff_eq!(s.mean, total / 2.0, epsilon = 0.05);
        assert_abs_diff_eq!(s.std, total / 12f64.sqrt(), epsilon = 0.05);
        assert_abs_diff_eq!(s.ess, 20_000.0, epsilon = 1e-6);
    }

    #[test]
    fn tiny_clouds_are_rejected() {
        let map = feature_map(6.0, FeatureKind::Bend);
        assert_eq!(
            pf_init(&map, 1, 0).unwrap_err(),
            EstimationError::InvalidParticleCount(1)
        );
        assert_eq!(
            pf_init(&map, 0, 0).unwrap_err(),
            EstimationError::InvalidParticleCount(0)
        );
        assert!(pf_init(&map, 2, 0).is_ok());
        assert_eq!(
            pf_init_at(&map, 1, 0, 1.0, 0.1).unwrap_err(),
            EstimationError::InvalidParticleCount(1)
        );
    }

    #[test]
    fn placed_init_concentrates_on_the_insertion_point() {
        let map = feature_map(6.0, FeatureKind::Bend);
        let belief = pf_init_at(&map, 20_000, 7, 2.0, 0.5).unwrap();
        let s = pf_estimate(&belief);
        assert_abs_diff_eq!(s.mean, 2.0, epsilon = 0.02);
        assert_abs_diff_eq!(s.std, 0.5, epsilon = 0.02);
        assert_abs_diff_eq!(s.ess, 20_000.0, epsilon = 1e-6);
    }

    #[test]
    fn placed_init_respects_the_map_edges() {
        let map = feature_map(6.0, FeatureKind::Bend);
        let total = map.total_arclength();
        let belief = pf_init_at(&map, 5_000, 3, 0.0, 1.0).unwrap();
        assert!(belief.particles.iter().all(|&x| (0.0..=total).contains(&x)));
        // Half the mass clamps to the boundary, so the mean sits above it.
        let s = pf_estimate(&belief);
        assert!(s.mean > 0.0 && s.mean < 0.6, "mean {}", s.mean);
        // A center off the map is pulled back onto it.
        let belief = pf_init_at(&map, 100, 3, total + 5.0, 0.0).unwrap();
        assert!(belief.particles.iter().all(|&x| x == total));
    }

    #[test]
    fn zero_sigma_trusts_the_placement_exactly() {
        let map = feature_map(6.0, FeatureKind::Bend);
        let belief = pf_init_at(&map, 50, 0, 1.25, 0.0).unwrap();
        assert!(belief.particles.iter().all(|&x| x == 1.25));
        let s = pf_estimate(&belief);
        assert!(s.std < 1e-9, "std {}", s.std);
    }

    #[test]
    fn echoes_contract_the_cloud_onto_the_truth() {
        let map = feature_map(6.0, FeatureKind::Bend);
        let model = quiet_model();
        let mut belief = pf_init(&map, 500, 11).unwrap();
        let mut sensor_rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);

        // Truth walks from 3.0 m in 1 cm steps, well inside echo range.
        let mut truth = 3.0;
        let u = 0.01;
        for _ in 0..40 {
            truth += u;
            let z = ultrasonic_measure(&model, &map, truth, &mut sensor_rng);
            let _ = pf_update(&mut belief, u, 0.002, &z, &map, &model);
        }
        let s = pf_estimate(&belief);
        assert!(
            (s.mean - truth).abs() < 0.05,
            "mean {} vs truth {truth}",
            s.mean
        );
        assert!(s.std < 0.05, "std {}", s.std);
        assert_eq!(belief.degenerate_resets, 0);
    }

    #[test]
    fn silence_rules_out_the_near_field() {
        // Feature at 10 m, truth far back: every ping is NoEcho, which should
        // empty the region within echo range of the feature.
        let map = feature_map(10.0, FeatureKind::TJunction);
        let model = quiet_model();
        let mut belief = pf_init(&map, 2000, 3).unwrap();
        for _ in 0..20 {
            let _ = pf_update(&mut belief, 0.0, 0.001, &RangeReading::NoEcho, &map, &model);
        }
        // Positions past the feature are also silent, so only the
        // approach-side slice within earshot of the feature empties out.
        let feature = map.feature_start(0).unwrap();
        let horizon_start = feature - model.max_range;
        let near: f64 = belief
            .particles
            .iter()
            .zip(&belief.weights)
            .filter(|(x, _)| **x > horizon_start + 0.2 && **x < feature)
            .map(|(_, w)| w)
            .sum();
        assert!(near < 0.01, "mass inside the horizon: {near}");
    }

    #[test]
    fn impossible_reading_resets_to_uniform() {
        let map = feature_map(6.0, FeatureKind::Bend);
        let model = quiet_model();
        let mut belief = pf_init(&map, 400, 5).unwrap();
        // Park every particle 0.1 m from the feature, then claim an echo at
        // 3 m: hundreds of sigma away, so nothing explains it.
        for x in belief.particles.iter_mut() {
            *x = 5.9;
        }
        let err = pf_update(
            &mut belief,
            0.0,
            0.0,
            &RangeReading::Echo(3.0),
            &map,
            &model,
        );
        assert_eq!(err.unwrap_err(), EstimationError::Degenerate);
        assert_eq!(belief.degenerate_resets, 1);
        let s = pf_estimate(&belief);
        assert!(
            s.std > 1.0,
            "cloud should be spread out again, std {}",
            s.std
        );
        assert_abs_diff_eq!(s.ess, 400.0, epsilon = 1e-9);
    }

    #[test]
    fn sharp_update_lowers_effective_sample_size() {
        let map = feature_map(6.0, FeatureKind::Bend);
        let model = quiet_model();
        let mut belief = pf_init(&map, 1000, 13).unwrap();
        pf_update(
            &mut belief,
            0.0,
            0.0,
            &RangeReading::Echo(3.0),
            &map,
            &model,
        )
        .unwrap();
        let s = pf_estimate(&belief);
        assert!(s.ess < 100.0, "ess {}", s.ess);
        assert!(s.ess >= 1.0);
    }

    #[test]
    fn predict_shifts_without_reweighting() {
        let map = feature_map(6.0, FeatureKind::Bend);
        let mut belief = pf_init(&map, 5000, 17).unwrap();
        let before = pf_estimate(&belief);
        let weights_before = belief.weights.clone();
        pf_predict(&mut belief, 0.25, 0.001, &map);
        let after = pf_estimate(&belief);
        assert_abs_diff_eq!(after.mean, before.mean + 0.25, epsilon = 0.02);
        assert_eq!(belief.weights, weights_before);
    }

    #[test]
    fn particles_stay_on_the_map() {
        let map = feature_map(6.0, FeatureKind::Bend);
        let total = map.total_arclength();
        let mut belief = pf_init(&map, 300, 19).unwrap();
        pf_predict(&mut belief, -100.0, 0.01, &map);
        assert!(belief.particles.iter().all(|&x| x == 0.0));
        pf_predict(&mut belief, 2.0 * total, 0.01, &map);
        assert!(belief.particles.iter().all(|&x| x == total));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let map = feature_map(6.0, FeatureKind::Bend);
        let model = quiet_model();
        let run = |seed| {
            let mut b = pf_init(&map, 200, seed).unwrap();
            for k in 0..10 {
                let z = if k % 3 == 0 {
                    RangeReading::NoEcho
                } else {
                    RangeReading::Echo(2.5 - 0.01 * k as f64)
                };
                let _ = pf_update(&mut b, 0.01, 0.002, &z, &map, &model);
            }
            (b.particles, b.weights)
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42).0, run(43).0);
    }
}
