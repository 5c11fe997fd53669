//! Seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded through
//! [`rng`], whose 64-bit seed comes from [`derive`]: a SplitMix64 finalizer
//! applied to `master ^ stream_tag`, then again after adding the counter.
//! Independent components (generator events, tuner trials, dropout masks)
//! use distinct stream tags, so results do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Values are part of the reproducibility contract.
pub mod stream {
    pub const EVENT: u64 = 0x4556_454e_5400_0001;
    pub const INIT: u64 = 0x494e_4954_0000_0002;
    pub const SHUFFLE: u64 = 0x5348_5546_0000_0003;
    pub const DROPOUT: u64 = 0x4452_4f50_0000_0004;
    pub const TRIAL: u64 = 0x5452_4941_4c00_0005;
    pub const SUGGEST: u64 = 0x5355_4747_0000_0006;
    pub const PERMUTE: u64 = 0x5045_524d_0000_0007;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of item `counter` in stream `stream` under `master`.
pub fn derive(master: u64, stream: u64, counter: u64) -> u64 {
    splitmix64(splitmix64(master ^ stream).wrapping_add(counter))
}

pub fn rng(master: u64, stream: u64, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, stream, counter))
}
