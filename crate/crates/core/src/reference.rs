//! Bundled reference algorithms and a few hand-written ones used in tests
//! and examples.

use crate::model::{Algorithm, AlgorithmClass, Params};

pub const TABLE4_TEXT: &str = include_str!("../data/table4.alg");
pub const TABLE5_TEXT: &str = include_str!("../data/table5.alg");

/// Cyclic algorithm for n=4, f=1, s=3 stabilising in 7 rounds.
pub fn table4() -> Algorithm {
    Algorithm::from_text(TABLE4_TEXT).expect("bundled table4.alg is valid")
}

/// General algorithm for n=6, f=1, s=2 stabilising in 6 rounds.
pub fn table5() -> Algorithm {
    Algorithm::from_text(TABLE5_TEXT).expect("bundled table5.alg is valid")
}

/// Fault-free 2-counter where every node adopts the successor of node 0's
/// state. Stabilises in one round.
pub fn follow_the_leader(n: usize) -> Algorithm {
    let params = Params::new(n, 0, 2, 1).expect("valid parameters");
    Algorithm::from_fn(params, AlgorithmClass::General, |_, u| 1 - u[0])
        .expect("valid table")
}

/// Every node keeps its own state. Never stabilises.
pub fn identity(params: Params) -> Algorithm {
    Algorithm::from_fn(params, AlgorithmClass::General, |i, u| u[i]).expect("valid table")
}

/// The single-node flip `x -> 1 - x`.
pub fn flip() -> Algorithm {
    let params = Params::new(1, 0, 2, 0).expect("valid parameters");
    Algorithm::from_fn(params, AlgorithmClass::General, |_, u| 1 - u[0]).expect("valid table")
}
