use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Interval;

/// Source of randomness used by the dynamics.
///
/// Splitting α draws from other uniform draws lets tests pin α while keeping
/// every other random event live, and lets the environment count α draws.
pub trait Randomness {
    /// A fresh gradient coefficient.
    fn alpha(&mut self) -> f64;
    /// Uniform sample in `[0, 1)`.
    fn unit(&mut self) -> f64;

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

/// Uniform α in `range`, inclusive on both ends.
pub fn sample_alpha<R: Rng + ?Sized>(rng: &mut R, range: Interval) -> f64 {
    rng.gen_range(range.lo..=range.hi)
}

/// Seeded environment randomness.
#[derive(Debug, Clone)]
pub struct EnvRng {
    rng: ChaCha8Rng,
    alpha_range: Interval,
    alpha_draws: u64,
}

impl EnvRng {
    pub fn new(seed: u64, alpha_range: Interval) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            alpha_range,
            alpha_draws: 0,
        }
    }

    pub fn alpha_draws(&self) -> u64 {
        self.alpha_draws
    }
}

impl Randomness for EnvRng {
    fn alpha(&mut self) -> f64 {
        self.alpha_draws += 1;
        sample_alpha(&mut self.rng, self.alpha_range)
    }

    fn unit(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
