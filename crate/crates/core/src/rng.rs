//! Seeded random streams.
//!
//! Every stochastic step in the simulator draws from a stream derived from a
//! single user seed plus a path of integers (setting, block, frame, ...). The
//! derivation is position-based, so results never depend on how work is
//! scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};

/// Generator used for channel noise and symbol sampling.
pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `base` and a path of indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut state = mix64(base ^ 0x9e37_79b9_7f4a_7c15);
    for &p in path {
        state = mix64(state.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ mix64(p.wrapping_add(1)));
    }
    state
}

pub fn sim_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Source of Bob's secret bits.
///
/// The simulator uses [`SeededQrng`]; a hardware generator can be plugged in
/// by implementing this trait.
pub trait BitSource {
    /// Fills `out` with independent uniform bits, one bit per byte (0 or 1).
    fn fill_bits(&mut self, out: &mut [u8]);
}

/// Deterministic stand-in for a quantum random number generator, backed by
/// ChaCha20.
#[derive(Debug, Clone)]
pub struct SeededQrng {
    rng: ChaCha20Rng,
}

impl SeededQrng {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }
}

impl BitSource for SeededQrng {
    fn fill_bits(&mut self, out: &mut [u8]) {
        for chunk in out.chunks_mut(64) {
            let word = self.rng.next_u64();
            for (i, b) in chunk.iter_mut().enumerate() {
                *b = ((word >> i) & 1) as u8;
            }
        }
    }
}
