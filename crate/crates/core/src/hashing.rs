//! Stable, seedable hashing used by the synthetic backends.
//!
//! `std::hash` makes no cross-version stability promise, so the synthetic
//! oracle and the feature-hashing embedder use FNV-1a with a SplitMix64
//! finalizer instead.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Incremental hasher over byte chunks. Chunks are length-prefixed so that
/// `("ab", "c")` and `("a", "bc")` hash differently.
#[derive(Clone, Copy)]
pub(crate) struct StableHasher(u64);

impl StableHasher {
    pub(crate) fn new(seed: u64) -> Self {
        Self(FNV_OFFSET ^ mix64(seed))
    }

    fn bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub(crate) fn str(mut self, s: &str) -> Self {
        self.bytes(&(s.len() as u64).to_le_bytes());
        self.bytes(s.as_bytes());
        self
    }

    pub(crate) fn u64(mut self, v: u64) -> Self {
        self.bytes(&v.to_le_bytes());
        self
    }

    pub(crate) fn finish(self) -> u64 {
        mix64(self.0)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub(crate) fn unit(self) -> f64 {
        (self.finish() >> 11) as f64 / (1u64 << 53) as f64
    }
}
