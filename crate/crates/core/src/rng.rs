//! Counter-based random streams.
//!
//! A stream is identified by `(global_seed, stream_index)`; its output at word
//! position `n` depends on nothing else, so per-image streams give the same
//! draws no matter which worker runs the image or in what order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream-index namespaces so different consumers of one global seed never overlap.
pub mod streams {
    /// Scene `i` of a generation run uses `SCENE + i`.
    pub const SCENE: u64 = 0;
    /// Style variants of seed `i` use `VARIANTS + i`.
    pub const VARIANTS: u64 = 1 << 60;
    /// Patch extraction, splitting and training in the gap meter.
    pub const GAPMETER: u64 = 2 << 60;
}

#[derive(Clone, Debug)]
pub struct RngStream {
    global_seed: u64,
    stream_index: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(global_seed: u64, stream_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(global_seed);
        inner.set_stream(stream_index);
        Self { global_seed, stream_index, inner }
    }

    pub fn global_seed(&self) -> u64 {
        self.global_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`; returns `lo` when the range is empty.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * self.uniform()
    }

    /// Bernoulli trial; `p <= 0` never fires and `p >= 1` always fires.
    pub fn chance(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Uniform integer in the inclusive range `[lo, hi]`.
    pub fn int_in(&mut self, lo: i64, hi: i64) -> i64 {
        if hi <= lo {
            return lo;
        }
        self.inner.random_range(lo..=hi)
    }

    /// Fisher-Yates shuffle driven by this stream.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

pub fn rng_stream(global_seed: u64, index: u64) -> RngStream {
    RngStream::new(global_seed, index)
}
