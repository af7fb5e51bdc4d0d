//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from ChaCha8. A stream is
//! identified by `(seed, domain, index)`: the key comes from
//! `ChaCha8Rng::seed_from_u64(splitmix64(seed ^ domain))` and `index` selects
//! the ChaCha stream via `set_stream`. Sample `i` of a dataset always uses
//! stream `i`, so changing the sample count never perturbs earlier samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags keep the streams used for different purposes disjoint.
pub mod domain {
    pub const DATA: u64 = 0x6461_7461_0000_0001;
    pub const INIT: u64 = 0x696e_6974_0000_0002;
    pub const SHUFFLE: u64 = 0x7368_7566_0000_0003;
    pub const RUN: u64 = 0x7275_6e73_0000_0004;
    pub const ORDER_STATS: u64 = 0x6f72_6473_0000_0005;
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, domain: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ domain));
    rng.set_stream(index);
    rng
}

/// Seed for the `run`-th independent repetition under a base seed.
pub fn derive_seed(base: u64, run: u64) -> u64 {
    splitmix64(splitmix64(base ^ domain::RUN).wrapping_add(run))
}
