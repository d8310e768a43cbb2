//! Seedable counter-based random number generator.
//!
//! Splits and experiment repetitions record their seed, so the generator
//! algorithm is pinned here rather than delegated to an external crate:
//! the i-th output is `mix64(key + i * GOLDEN_GAMMA)` where `mix64` is
//! the SplitMix64 finalizer (Steele, Lea & Flood 2014). Any
//! implementation, in any language, that applies the same mix to the
//! same key reproduces the same stream.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: a bijective avalanche mix on 64 bits.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent stream key from a base seed and a stream id.
///
/// Used to give each class / tree / repetition its own stream so that
/// adding one unit of work never perturbs another.
pub fn derive_stream(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream.wrapping_add(GOLDEN_GAMMA)))
}

/// Counter-based generator: state is (key, counter); output i is
/// `mix64(key + i * GOLDEN_GAMMA)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        CounterRng { key, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        let z = self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA));
        self.counter = self.counter.wrapping_add(1);
        mix64(z)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). Multiply-shift; slight bias is
    /// negligible for n far below 2^64 and keeps the output a pure
    /// function of a single draw.
    pub fn next_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via Box-Muller. Consumes two draws per pair;
    /// the spare is not cached so the stream position stays a simple
    /// function of call count.
    pub fn next_gaussian(&mut self) -> f64 {
        // u in (0,1] to keep ln finite
        let u = 1.0 - self.next_f64();
        let v = self.next_f64();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }

    /// Sample k distinct indices from [0, n) by partial Fisher-Yates.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        debug_assert!(k <= n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.next_below(n - i);
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx
    }
}
