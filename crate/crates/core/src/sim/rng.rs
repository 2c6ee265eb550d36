//! Seeded substreams.
//!
//! One ChaCha20 key per scenario seed; every `(replicate, purpose, attempt)` triple
//! gets its own 64-bit stream id, so adding a draw for one purpose never shifts the
//! numbers seen by another.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    InclusionProbability = 1,
    Indicators = 2,
    Design = 3,
    GScale = 4,
    Coefficients = 5,
    Noise = 6,
}

pub struct Substream {
    rng: ChaCha20Rng,
    normal: Normal,
}

impl Substream {
    pub fn new(seed: u64, rep: u64, purpose: Purpose, attempt: u8) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        assert!(rep < 1 << 48, "replicate index out of range");
        rng.set_stream(rep << 16 | (purpose as u64) << 8 | attempt as u64);
        Self {
            rng,
            normal: Normal::standard(),
        }
    }

    /// Uniform on the open interval `(0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    /// Standard normal by inversion of the CDF.
    pub fn normal(&mut self) -> f64 {
        let u = self.uniform();
        self.normal.inverse_cdf(u)
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }
}
