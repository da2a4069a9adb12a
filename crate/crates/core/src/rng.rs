//! Deterministic randomness.
//!
//! Every stochastic operation takes an [`RngSpec`] and builds its generator
//! from it. The generator is ChaCha8 (`rand_chacha`), seeded through
//! `SeedableRng::seed_from_u64` (PCG32 key expansion) with the 64-bit ChaCha
//! stream selected by `stream_id`. Both steps are fully specified and
//! platform independent, so a given `(seed, stream_id)` yields the same draws
//! everywhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator type behind every [`RngSpec`].
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Derives an independent sub-stream, e.g. one per pipeline stage or per
    /// time segment. The mapping is a fixed SplitMix64 mix of the parent
    /// stream id and the label.
    pub fn child(&self, label: u64) -> RngSpec {
        RngSpec {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(label.wrapping_add(0x9E37_79B9_7F4A_7C15))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw on the open interval (0, 1) with 53 bits of resolution.
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.gen::<u64>() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Exponential variate with the given rate, by inversion.
#[inline]
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -libm::log(open01(rng)) / rate
}

/// Standard normal variate by Box–Muller on libm, so draws are
/// bit-identical across platforms. One variate per call; the sine branch
/// is discarded to keep the draw count per call fixed.
#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1 = open01(rng);
    let u2 = open01(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * std::f64::consts::PI * u2)
}
