//! Counter-based random streams.
//!
//! A [`StreamKey`] is derived by hashing a seed together with an ordered list
//! of integer tags (a domain constant, a vertex id, a generation, ...). The
//! stream it opens produces `mix(key + n·φ)` for `n = 1, 2, ...`, i.e. the
//! SplitMix64 sequence started at the key. Two draws agree iff their tag
//! paths agree, independently of evaluation order or thread placement.

use rand_core::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Domain separation tags.
pub mod domain {
    pub const SITE: u64 = 0x51_7E;
    pub const RADIAL: u64 = 0x007A_D1A1;
    pub const MIXTURE: u64 = 0x0031_3C7E;
    pub const POOL: u64 = 0x9001;
    pub const CHAIN: u64 = 0x000C_4A14;
    pub const EXPERIMENT: u64 = 0xE4_9E;
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey(mix64(seed ^ 0x5851_F42D_4C95_7F2D))
    }

    /// Appends a tag. Order matters: `k.with(a).with(b) != k.with(b).with(a)`
    /// for `a != b` (up to hash collisions).
    #[inline]
    pub fn with(self, tag: u64) -> Self {
        StreamKey(mix64(
            self.0.rotate_left(17) ^ mix64(tag.wrapping_add(GOLDEN)),
        ))
    }

    #[inline]
    pub fn stream(self) -> Stream {
        Stream {
            key: self.0,
            counter: 0,
        }
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl Stream {
    #[inline]
    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn open01(&mut self) -> f64 {
        ((self.next() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n` (multiply-shift; bias below 2^-64·n).
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next() as u128 * n as u128) >> 64) as usize
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        (self.next() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
