//! Seedable counter-based generator (splitmix64).
//!
//! One root seed is split into independent substreams per subsystem
//! (dataset split, parameter init, dropout, triple sampling) via
//! [`Rng::derive`], so varying one component leaves the others untouched.

/// Deterministic 64-bit generator. Identical seeds produce identical streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Restores a generator from a previously captured [`Rng::state`].
    pub fn from_state(state: u64) -> Self {
        Self { state }
    }

    /// Current counter, sufficient to reproduce the remaining stream.
    pub fn state(&self) -> u64 {
        self.state
    }

    /// Independent substream labeled `stream`; does not advance `self`.
    pub fn derive(&self, stream: u64) -> Rng {
        Rng::new(mix(self.state.wrapping_add(GAMMA.wrapping_mul(stream.wrapping_add(1)))))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[0, n)`.
    #[inline]
    pub fn next_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_below(i + 1);
            xs.swap(i, j);
        }
    }

    /// Draws `count` distinct indices from `0..n` by partial Fisher–Yates.
    pub fn sample_distinct(&mut self, n: usize, count: usize) -> alloc::vec::Vec<usize> {
        debug_assert!(count <= n);
        let mut pool: alloc::vec::Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = i + self.next_below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool
    }
}
