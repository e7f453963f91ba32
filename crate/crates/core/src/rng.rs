//! Counter-based random streams.
//!
//! Every chain owns an independent ChaCha8 stream selected by
//! `(seed, stream)`; the draw used at step `k` sits at a fixed word
//! position, so any state of any chain can be regenerated from
//! `(seed, chain, step)` alone and results never depend on how chains are
//! spread over workers.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// 64-bit words consumed per chain step.
const WORDS_PER_STEP: u128 = 2;

/// Stream tags separating transition draws from initial-law draws.
const TAG_STEPS: u64 = 0;
const TAG_INIT: u64 = 1;

/// Random stream for one chain.
#[derive(Clone, Debug)]
pub struct ChainRng {
    inner: ChaCha8Rng,
}

impl ChainRng {
    /// Stream for the transitions of `chain`, positioned at step 0.
    pub fn new(seed: u64, chain: u64) -> Self {
        Self::with_tag(seed, chain, TAG_STEPS)
    }

    /// Stream for the transitions of `chain`, positioned at `step`.
    pub fn at_step(seed: u64, chain: u64, step: u64) -> Self {
        let mut rng = Self::new(seed, chain);
        rng.inner.set_word_pos(step as u128 * WORDS_PER_STEP);
        rng
    }

    /// Separate stream used to draw the initial state of `chain`.
    pub fn for_initial(seed: u64, chain: u64) -> Self {
        Self::with_tag(seed, chain, TAG_INIT)
    }

    fn with_tag(seed: u64, chain: u64, tag: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(chain.wrapping_mul(2).wrapping_add(tag));
        Self { inner }
    }

    /// Uniform draw on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for ChainRng {
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

/// SplitMix64 finalizer; used to derive sub-seeds from structured keys.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
