//! Verification and synthesis of self-stabilising, Byzantine fault-tolerant
//! synchronous 2-counting algorithms.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: parameters, configurations, projections and transition tables.
//! * [`verifier`]: exact checking through projection graphs.
//! * [`solver`]: SAT backends (in-process CaDiCaL and external DIMACS solvers).
//! * [`direct`]: the direct propositional encoding of the synthesis problem.
//! * [`cegar`]: counter-example guided synthesis over a bounded unrolling.
//! * [`transforms`]: adding nodes, other topologies and layered counters.
//! * [`sim`]: round-by-round simulation with Byzantine adversaries.

pub mod cegar;
pub mod direct;
pub mod model;
pub mod reference;
pub mod sim;
pub mod solver;
pub mod transforms;
pub mod verifier;

pub use model::{
    ActualConfig, Algorithm, AlgorithmClass, ConfigSpace, Execution, FaultSet, ModelError,
    ObservedConfig, Params,
};
pub use verifier::{ProjectionGraph, StabilizationBounds, Verdict, VerificationReport};
