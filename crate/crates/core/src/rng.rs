//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded by
//! [`derive_seed`], which mixes a master seed with a list of stream
//! coordinates (replicate index, cell index, a stream label). Streams are
//! independent of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over a label, used to turn stream names into coordinates.
pub fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(mix64(master.wrapping_add(GOLDEN)), |acc, &c| {
        mix64(acc ^ mix64(c.wrapping_add(GOLDEN)))
    })
}

pub fn stream(master: u64, coords: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, coords))
}

/// Stream for `(master, replicate, label)`.
pub fn replicate_stream(master: u64, replicate: u64, label: &str) -> Rng {
    stream(master, &[replicate, label_hash(label)])
}
