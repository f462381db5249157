//! Dense histogram filter over arclength.
//!
//! Same motion and measurement models as the particle filter, evaluated on a
//! fixed grid with exhaustive convolution instead of sampling.  Orders of
//! magnitude slower per update, but free of Monte Carlo error, which makes it
//! the reference the particle filter is judged against in tests.

use super::ultrasonic::{RangeReading, UltrasonicModel};
use super::{normal_cdf, normal_pdf};
use crate::pipe_map::PipeMap;

/// Posterior over position, discretized into uniform bins.
#[derive(Debug, Clone)]
pub struct GridFilter {
    /// Bin width [m].
    pub bin_width: f64,
    /// Probability mass per bin; always sums to 1.
    pub probs: Vec<f64>,
    /// Map length covered [m].
    total: f64,
    /// Times the posterior lost all mass and reset to uniform.
    pub degenerate_resets: u32,
}

impl GridFilter {
    /// Uniform prior over a map of the given total arclength.
    pub fn uniform(total_arclength: f64, bin_width: f64) -> Self {
        assert!(bin_width > 0.0 && total_arclength > bin_width);
        let n = (total_arclength / bin_width).ceil() as usize;
        Self {
            bin_width,
            probs: vec![1.0 / n as f64; n],
            total: total_arclength,
            degenerate_resets: 0,
        }
    }

    /// Center of bin `i`, clamped onto the map.
    fn center(&self, i: usize) -> f64 {
        ((i as f64 + 0.5) * self.bin_width).min(self.total)
    }

    /// Shift the posterior by `u` and blur it by Gaussian odometry noise.
    /// Mass pushed off either end piles up in the edge bin, mirroring the
    /// particle filter's clamp.
    pub fn predict(&mut self, u: f64, sigma: f64) {
        let n = self.probs.len();
        let bw = self.bin_width;
        let reach = 5.0 * sigma.max(bw);
        let k_min = ((u - reach) / bw).floor() as i64;
        let k_max = ((u + reach) / bw).ceil() as i64;
        // Discretized kernel over bin offsets.
        let mut kernel = Vec::with_capacity((k_max - k_min + 1) as usize);
        let mut k_sum = 0.0;
        for k in k_min..=k_max {
            let w = if sigma > 0.0 {
                normal_pdf(k as f64 * bw - u, sigma)
            } else if k == (u / bw).round() as i64 {
                1.0
            } else {
                0.0
            };
            kernel.push(w);
            k_sum += w;
        }
        if k_sum <= 0.0 {
            // Kernel degenerated (sigma far below bin scale): nearest-bin shift.
            kernel.fill(0.0);
            let mid = ((u / bw).round() as i64 - k_min) as usize;
            let last = kernel.len() - 1;
            kernel[mid.min(last)] = 1.0;
            k_sum = 1.0;
        }
        for w in kernel.iter_mut() {
            *w /= k_sum;
        }

        let mut next = vec![0.0; n];
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (ki, &w) in kernel.iter().enumerate() {
                let j = (i as i64 + k_min + ki as i64).clamp(0, n as i64 - 1) as usize;
                next[j] += p * w;
            }
        }
        self.probs = next;
    }

    /// Multiply in the rangefinder likelihood and renormalize.
    pub fn update(&mut self, z: &RangeReading, map: &PipeMap, model: &UltrasonicModel) {
        let mut sum = 0.0;
        for i in 0..self.probs.len() {
            let x = self.center(i);
            let like = match (z, map.distance_to_next_feature(x).ok().flatten()) {
                (RangeReading::Echo(measured), Some(d)) => {
                    normal_pdf(measured - d, model.noise_sigma)
                }
                (RangeReading::Echo(_), None) => 0.0,
                (RangeReading::NoEcho, Some(d)) => {
                    normal_cdf((d - model.max_range) / model.noise_sigma)
                }
                (RangeReading::NoEcho, None) => 1.0,
            };
            self.probs[i] *= like;
            sum += self.probs[i];
        }
        if sum <= 0.0 {
            let n = self.probs.len();
            self.probs.fill(1.0 / n as f64);
            self.degenerate_resets += 1;
        } else {
            for p in self.probs.iter_mut() {
                *p /= sum;
            }
        }
    }

    /// Posterior mean [m].
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * self.center(i))
            .sum()
    }

    /// Posterior standard deviation [m].
    pub fn std(&self) -> f64 {
        let m = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * (self.center(i) - m).powi(2))
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// Total mass; stays at 1 up to roundoff.
    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }
}
