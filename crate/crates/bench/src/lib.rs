//! Shared fixtures for the criterion benches.

use synccount_core::sim::derive_seed;
use synccount_core::{Algorithm, AlgorithmClass, Params};

/// A general algorithm with pseudo-random tables; most such tables never
/// stabilise, which makes them a fair worst case for graph construction.
pub fn random_general(params: Params, seed: u64) -> Algorithm {
    let mut k = 0u64;
    Algorithm::from_fn(params, AlgorithmClass::General, |_, _| {
        k += 1;
        (derive_seed(seed, &[k]) % params.s as u64) as u8
    })
    .expect("parameters are valid")
}

pub fn params(n: usize, f: usize, s: usize, t: u32) -> Params {
    Params::new(n, f, s, t).expect("parameters are valid")
}
