//! Pinned pseudo-random generation.
//!
//! Every random choice in the pipeline (weight init, pixel permutations,
//! minibatch shuffles) flows through the generators in this module, so a
//! run is fully reproducible from its seeds and permutations are portable
//! across implementations. Two published algorithms are used, implemented
//! exactly per their reference code and locked by known-answer tests:
//!
//! - **splitmix64** (Steele, Lea & Flood; the `java.util.SplittableRandom`
//!   finalizer): used to expand a 64-bit seed into generator state and to
//!   derive independent sub-stream seeds.
//! - **xoshiro256\*\* 1.0** (Blackman & Vigna): the main generator.
//!
//! Derived quantities are pinned too:
//!
//! - `next_f64` takes the top 53 bits: `(next_u64() >> 11) * 2^-53`,
//!   uniform on `[0, 1)`.
//! - `next_below(n)` is `next_u64() % n`. The modulo bias is below
//!   `n / 2^64`, irrelevant at the index ranges used here, and keeping
//!   the recipe branch-free makes it trivial to port.
//! - `shuffle` is the descending Fisher–Yates walk: for `i` from
//!   `len-1` down to `1`, swap `i` with `next_below(i + 1)`.

/// splitmix64 stream.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        mix64(self.state)
    }
}

/// The splitmix64 output finalizer. Also used standalone for seed
/// derivation (see [`derive_seed`]).
#[inline]
pub fn mix64(z: u64) -> u64 {
    let z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of a named sub-stream from a master seed.
///
/// The scheme is `mix64(mix64(mix64(master ^ tag) ^ a) ^ b)`; `tag`
/// separates stream families, `a`/`b` index the stream within a family.
/// It is part of the reproducibility contract: changing it changes every
/// derived run.
pub fn derive_seed(master: u64, tag: u64, a: u64, b: u64) -> u64 {
    mix64(mix64(mix64(master ^ tag) ^ a) ^ b)
}

/// Stream family tag for weight initialization.
pub const STREAM_INIT: u64 = 0x0057_4549_4748_5453; // "WEIGHTS"
/// Stream family tag for per-(task, epoch) minibatch shuffles.
pub const STREAM_SHUFFLE: u64 = 0x0053_4855_4646_4C45; // "SHUFFLE"

/// xoshiro256** 1.0.
#[derive(Debug, Clone)]
pub struct Xoshiro256StarStar {
    s: [u64; 4],
}

impl Xoshiro256StarStar {
    /// Seeds the 256-bit state from four consecutive splitmix64 outputs,
    /// the expansion recommended by the reference implementation.
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        Self { s: [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()] }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform on `[0, 1)` with 53 random mantissa bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`. `n` must be nonzero.
    #[inline]
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }

    /// Uniform on `[lo, hi)`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// In-place Fisher–Yates shuffle (descending walk).
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
