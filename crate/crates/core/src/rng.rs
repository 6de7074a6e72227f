//! Seeded, splittable random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by the
//! run seed, with the 64-bit stream id derived from `(instance, role)`. Two
//! different instances, or two roles within one instance, never share a
//! stream, so results do not depend on the order in which work items run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Role {
    Transmitters = 1,
    Receivers = 2,
    Fading = 3,
    Phases = 4,
    Symbols = 5,
    Noise = 6,
    LimitSamples = 7,
    SeparationProbe = 8,
    RateProfile = 9,
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Generator for the `(seed, instance, role)` substream.
pub fn substream(seed: u64, instance: u64, role: Role) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(splitmix64(instance ^ splitmix64(role as u64)));
    rng
}
