//! Seed fan-out: every stage draws its RNG from a master seed plus a label,
//! so a single number reproduces a whole pipeline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for a string label (FNV-1a over the label, mixed with the parent).
pub fn derive(parent: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(parent ^ splitmix64(h))
}

/// Child seed for an integer index.
pub fn derive_index(parent: u64, index: u64) -> u64 {
    splitmix64(parent.wrapping_add(splitmix64(index.wrapping_add(0x5eed))))
}
