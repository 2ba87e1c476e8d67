//! Stable hashing and seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a
//! 64-bit seed and a purpose tag, so that adding a new kind of draw never
//! perturbs an existing one and batch order never changes per-item output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw bytes. Stable across platforms and releases.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Combine a master seed with an index into an independent child seed.
pub fn mix(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

/// Child seed for a string key such as a pair id.
pub fn seed_for_key(seed: u64, key: &str) -> u64 {
    mix(seed, stable_hash(key.as_bytes()))
}

/// Independent random streams used during one generation call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stream {
    Speaker,
    TokenSpeakers,
    Tempo,
    Speed,
    Echo,
    CodeSwitch,
    TargetSpeaker,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Speaker => 1,
            Stream::TokenSpeakers => 2,
            Stream::Tempo => 3,
            Stream::Speed => 4,
            Stream::Echo => 5,
            Stream::CodeSwitch => 6,
            Stream::TargetSpeaker => 7,
        }
    }
}

pub(crate) fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, stream.tag()))
}
