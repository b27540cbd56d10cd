//! Reproducible random streams.
//!
//! Every chain draws from its own ChaCha8 stream: the 64-bit seed fixes the
//! key and the chain index selects the stream, so chains never overlap and
//! the sequence is identical on every platform. Replicate harnesses derive
//! per-replicate seeds from a master seed with SplitMix64.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// Stream `chain` under key `seed`.
pub fn chain_rng(seed: u64, chain: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

/// SplitMix64 finalizer applied to `master + index * golden_gamma`.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
