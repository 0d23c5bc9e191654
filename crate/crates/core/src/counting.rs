//! Coincidence counting: mean-rate model and seeded Poisson sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator used for every sampled count; recorded in result metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9) + Poisson (rand_distr 0.5)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountingConfig {
    /// Photon pairs per second at the crystal.
    pub pair_rate: f64,
    pub efficiency_signal: f64,
    pub efficiency_idler: f64,
    /// Seconds per scan point.
    pub integration_time: f64,
    /// Seconds.
    pub coincidence_window: f64,
    pub singles_rate_signal: f64,
    pub singles_rate_idler: f64,
    pub rng_seed: u64,
}

impl Default for CountingConfig {
    fn default() -> Self {
        CountingConfig {
            pair_rate: 4000.0,
            efficiency_signal: 1.0,
            efficiency_idler: 1.0,
            integration_time: 1.0,
            coincidence_window: 1e-9,
            singles_rate_signal: 1e4,
            singles_rate_idler: 1e4,
            rng_seed: 0,
        }
    }
}

impl CountingConfig {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("pair_rate", self.pair_rate),
            ("singles_rate_signal", self.singles_rate_signal),
            ("singles_rate_idler", self.singles_rate_idler),
        ];
        for (name, value) in non_negative {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::OutOfRange { name, value });
            }
        }
        for (name, value) in [
            ("efficiency_signal", self.efficiency_signal),
            ("efficiency_idler", self.efficiency_idler),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::OutOfRange { name, value });
            }
        }
        for (name, value) in [
            ("integration_time", self.integration_time),
            ("coincidence_window", self.coincidence_window),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::OutOfRange { name, value });
            }
        }
        Ok(())
    }

    /// Accidental coincidences per second.
    pub fn accidental_rate(&self) -> f64 {
        accidental_rate(
            self.singles_rate_signal,
            self.singles_rate_idler,
            self.coincidence_window,
        )
    }

    /// True coincidences per second for a detection probability of one.
    pub fn true_rate(&self) -> f64 {
        self.pair_rate * self.efficiency_signal * self.efficiency_idler
    }

    /// Expected counts in one integration window.
    pub fn mean_counts(&self, prob: f64) -> f64 {
        (prob * self.true_rate() + self.accidental_rate()) * self.integration_time
    }

    /// Seed of the stream for scan `index`.
    pub fn derived_seed(&self, index: u64) -> u64 {
        self.rng_seed ^ index
    }
}

/// `R_s · R_i · τ`.
pub fn accidental_rate(singles_signal: f64, singles_idler: f64, window: f64) -> f64 {
    singles_signal * singles_idler * window
}

/// A reproducible stream of Poisson-distributed counts.
#[derive(Debug, Clone)]
pub struct CountSampler {
    rng: ChaCha8Rng,
}

impl CountSampler {
    pub fn new(seed: u64) -> Self {
        CountSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn draw(&mut self, mean: f64) -> Result<u64> {
        if !(mean >= 0.0 && mean.is_finite()) {
            return Err(Error::OutOfRange {
                name: "mean",
                value: mean,
            });
        }
        if mean == 0.0 {
            return Ok(0);
        }
        let dist = Poisson::new(mean).map_err(|_| Error::OutOfRange {
            name: "mean",
            value: mean,
        })?;
        Ok(dist.sample(&mut self.rng) as u64)
    }
}

/// One count for a detection probability, drawn from a fresh stream seeded by
/// `cfg.rng_seed`.
pub fn sample_counts(prob: f64, cfg: &CountingConfig) -> Result<u64> {
    check_probability(prob)?;
    cfg.validate()?;
    CountSampler::new(cfg.rng_seed).draw(cfg.mean_counts(prob))
}

/// Counts for a whole scan, drawn in order from the stream of scan `index`.
pub fn sample_trace(probs: &[f64], cfg: &CountingConfig, index: u64) -> Result<Vec<u64>> {
    cfg.validate()?;
    let mut sampler = CountSampler::new(cfg.derived_seed(index));
    probs
        .iter()
        .map(|&p| {
            check_probability(p)?;
            sampler.draw(cfg.mean_counts(p))
        })
        .collect()
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "probability",
            value: p,
        })
    }
}
