//! Deterministic seed derivation for independent random streams.
//!
//! Every stochastic quantity draws from its own stream keyed by
//! `(master seed, domain, index)`, so results do not depend on the order
//! in which workers pick up tasks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DOMAIN_NOISE: u64 = 0x4e4f_4953;
pub const DOMAIN_SHOT: u64 = 0x5348_4f54;
pub const DOMAIN_BACKGROUND: u64 = 0x4247_4e44;
pub const DOMAIN_ENSEMBLE: u64 = 0x454e_534d;
pub const DOMAIN_SHOT_NOISE: u64 = 0x5348_4e5a;
pub const DOMAIN_COUNTS: u64 = 0x434e_5453;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(master: u64, domain: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(domain ^ splitmix64(index)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(master: u64, domain: u64, index: u64) -> ChaCha8Rng {
    rng(derive(master, domain, index))
}
