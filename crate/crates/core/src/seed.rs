//! Seed derivation. Every stochastic component draws from its own stream,
//! derived from the master seed and a `(stage, index)` name:
//!
//! `stream = splitmix64(master XOR fnv1a64(stage ":" index))`
//!
//! where `index` is written in decimal. Streams therefore do not depend on
//! execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn derive_seed(master: u64, stage: &str, index: u64) -> u64 {
    splitmix64(master ^ fnv1a64(format!("{stage}:{index}").as_bytes()))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(master: u64, stage: &str, index: u64) -> Rng {
    rng_from_seed(derive_seed(master, stage, index))
}
