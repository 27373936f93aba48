//! Deterministic derivation of independent random streams.
//!
//! Every stochastic component receives its own ChaCha stream whose seed is a
//! SplitMix64 fold of the master seed with a domain tag and a path of indices
//! (replicate, arm, chain, imputation, ...). No ambient entropy is used.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags keep streams for different purposes apart even when their
/// index paths coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Chain = 1,
    Imputation = 2,
    Delta = 3,
    Subsample = 4,
    Replicate = 5,
    Generate = 6,
    Dropout = 7,
    Counterfactual = 8,
    Inflate = 9,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a master seed, domain and index path into a child seed.
pub fn derive_seed(master: u64, domain: Domain, path: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ 0x5EED_0000_0000_0000);
    h = splitmix64(h ^ domain as u64);
    for &p in path {
        h = splitmix64(h ^ p.wrapping_mul(0xA24B_AED4_963E_E407));
    }
    h
}

pub fn stream(master: u64, domain: Domain, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, domain, path))
}
