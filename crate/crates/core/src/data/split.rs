//! Deterministic, language-independent split hashing.
//!
//! `u = splitmix64(fnv1a64(utf8(id) ++ le_bytes(seed))) / 2^64`, taking the
//! top 53 bits so the division is exact in `f64`.

use serde::{Deserialize, Serialize};

pub const TRAIN_FRACTION: f64 = 0.7;
pub const DEV_FRACTION: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform value in `[0, 1)` determined by `(id, seed)`.
pub fn split_unit(id: &str, seed: u64) -> f64 {
    let h = splitmix64(fnv1a64(id.bytes().chain(seed.to_le_bytes())));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

pub fn split_for(id: &str, seed: u64) -> Split {
    let u = split_unit(id, seed);
    if u < TRAIN_FRACTION {
        Split::Train
    } else if u < TRAIN_FRACTION + DEV_FRACTION {
        Split::Dev
    } else {
        Split::Test
    }
}

/// Child seed for a named purpose. Streams are keyed by name, never by
/// position, so adding a stream leaves the others untouched.
pub fn derive_seed(root: u64, stream: &str) -> u64 {
    splitmix64(fnv1a64(stream.bytes().chain(root.to_le_bytes())))
}
