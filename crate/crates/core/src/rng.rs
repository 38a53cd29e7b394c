//! Counter-style random streams.
//!
//! Every sample is drawn from a ChaCha stream whose key is a hash of the
//! root seed and a tuple of indices, so `(seed, t, j, l, trial)` always
//! yields the same draws no matter how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a root seed with a domain tag and an index tuple.
pub fn derive_key(seed: u64, domain: u64, indices: &[u64]) -> u64 {
    let mut h = splitmix(seed ^ splitmix(domain));
    for &i in indices {
        h = splitmix(h ^ splitmix(i.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

/// A generator keyed by `(seed, domain, indices)`.
pub fn stream(seed: u64, domain: u64, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_key(seed, domain, indices))
}

pub(crate) mod domain {
    pub const CODEBOOK: u64 = 1;
    pub const CHANNEL_NOISE: u64 = 2;
    pub const ENCODER: u64 = 3;
    pub const COVERING: u64 = 4;
    pub const RESTART: u64 = 5;
    pub const DIAMOND: u64 = 6;
    pub const PROTOCOL: u64 = 7;
    pub const VERIFY: u64 = 8;
}
