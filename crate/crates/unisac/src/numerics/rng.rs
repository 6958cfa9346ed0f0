//! Reproducible random streams.
//!
//! A [`RandomStream`] is a value type naming one deterministic sample
//! sequence: a 64-bit seed plus a 64-bit stream id mapped onto the ChaCha12
//! counter-based generator. Identical `(seed, id)` pairs produce identical
//! sequences on every platform, so Monte Carlo loops can hand each trial its
//! own substream and stay bit-reproducible under any parallel schedule.
//!
//! Substream ids follow the convention `id = experiment * 2^32 + index`;
//! experiment numbers are allocated by the caller (the CLI keeps a single
//! allocation table), trial indices enumerate the independent repetitions
//! inside one experiment.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Name of one deterministic sample sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    seed: u64,
    id: u64,
}

impl RandomStream {
    /// Root stream (id 0) of a seed.
    pub fn new(seed: u64) -> Self {
        RandomStream { seed, id: 0 }
    }

    /// Stream with an explicit id under the same seed.
    pub fn with_id(self, id: u64) -> Self {
        RandomStream { seed: self.seed, id }
    }

    /// Substream `experiment * 2^32 + index` under the same seed.
    pub fn substream(self, experiment: u32, index: u32) -> Self {
        self.with_id(((experiment as u64) << 32) | index as u64)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.id);
        rng
    }
}

/// One draw from the circularly-symmetric complex Gaussian CN(0, var):
/// real and imaginary parts are independent N(0, var/2). Draw order is fixed
/// as (real, imaginary).
pub fn complex_gaussian(rng: &mut impl Rng, var: f64) -> Complex64 {
    let scale = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}
