//! Seed derivation for independent, reproducible random substreams.
//!
//! Every stochastic component draws from its own ChaCha stream keyed by
//! `(root seed, domain, index)`. Changing the policy or the data
//! heterogeneity therefore never shifts another component's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named purposes for derived streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Harvest = 1,
    Batches = 2,
    Probe = 3,
    Scheduler = 4,
    Pool = 5,
    Partition = 6,
    Init = 7,
    Test = 8,
    Sweep = 9,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with a domain tag and an index into a new 64-bit seed.
pub fn derive_seed(root: u64, domain: Domain, index: u64) -> u64 {
    let a = splitmix64(root);
    let b = splitmix64(a ^ (domain as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ index.wrapping_mul(0xA076_1D64_78BD_642F))
}

pub fn stream(root: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, domain, index))
}
