//! Seed derivation. Every random stream in the crate is keyed by a path
//! `(master, namespace, indices...)`, so results never depend on the order
//! in which episodes are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Training episodes; indexed by `(cycle, episode)`.
pub const TRAINING: u64 = 0x7472_6169_6e00_0001;
/// Held-out evaluation episodes shared by every cycle of an experiment.
pub const EVALUATION: u64 = 0x6576_616c_0000_0002;
/// Fresh seeds never seen by the gate.
pub const FRESH: u64 = 0x6672_6573_6800_0003;
/// Cross-validation shuffles.
pub const FOLDS: u64 = 0x666f_6c64_0000_0004;
/// World generation.
pub const WORLD: u64 = 0x776f_726c_6400_0005;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(master: u64, namespace: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(namespace));
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
