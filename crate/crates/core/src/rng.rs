//! Counter-based random stream.
//!
//! Every uniform variate is a pure function of `(seed, stream, position, draw)`,
//! so a sampler's output does not depend on how work is split across threads
//! or batches. The mixing function is the SplitMix64 finalizer applied once per
//! key component.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A random stream identified by `(seed, stream)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeyedStream {
    key: u64,
}

impl KeyedStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let key = mix64(mix64(seed.wrapping_add(GOLDEN)) ^ stream.wrapping_mul(GOLDEN));
        KeyedStream { key }
    }

    /// A derived, independent stream; used to separate e.g. source and target sides.
    pub fn substream(&self, tag: u64) -> Self {
        KeyedStream { key: mix64(self.key ^ mix64(tag.wrapping_add(0xD1B5_4A32_D192_ED03))) }
    }

    #[inline]
    pub fn bits(&self, position: u64, draw: u64) -> u64 {
        mix64(mix64(self.key ^ position.wrapping_mul(GOLDEN)) ^ draw.wrapping_add(GOLDEN))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&self, position: u64, draw: u64) -> f64 {
        (self.bits(position, draw) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// One Bernoulli(p) trial. Never fires for `p <= 0`, always fires for `p >= 1`.
    #[inline]
    pub fn bernoulli(&self, position: u64, draw: u64, p: f64) -> bool {
        self.uniform(position, draw) < p
    }
}
