//! Counter-based random number streams.
//!
//! Every consumer of randomness gets its own [`RngStream`] derived from
//! `(seed, generation, slot)`. The n-th draw of a stream is a pure function
//! of those three values and n, so results never depend on thread scheduling
//! or on how work is split across lanes, and a resumed run replays the exact
//! draws of an uninterrupted one.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Root key of a run; hands out independent per-(generation, slot) streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngKey {
    seed: u64,
}

impl RngKey {
    pub fn new(seed: u64) -> Self {
        RngKey { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream for one (generation, slot) pair.
    pub fn stream(&self, generation: u64, slot: u64) -> RngStream {
        let a = mix64(self.seed ^ GOLDEN);
        let b = mix64(a ^ generation.wrapping_mul(0xd605_bbb5_8c8a_bc2d));
        let c = mix64(b ^ slot.wrapping_mul(0xca5a_8263_9512_1157));
        RngStream { base: c, counter: 0 }
    }
}

/// SplitMix64 sequence anchored at a derived base state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    base: u64,
    counter: u64,
}

impl RngStream {
    /// Standalone stream, mainly for tests and one-off shuffles.
    pub fn from_seed(seed: u64) -> Self {
        RngKey::new(seed).stream(0, 0)
    }

    pub fn next_u64(&mut self) -> u64 {
        let out = mix64(self.base.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter += 1;
        out
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform in [lo, hi).
    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.next_f64() * (hi - lo)
    }

    pub fn coin(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Normal(0, sigma) via Box-Muller.
    pub fn normal(&mut self, sigma: f64) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        sigma * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates shuffle of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            idx.swap(i, j);
        }
        idx
    }
}
