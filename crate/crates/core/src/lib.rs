//! Chain-transitivity structure, shadowing checks and distributional chaos
//! witnesses for finite and symbolic dynamical systems.
//!
//! Every analysis is generic over the distance scalar ([`Scalar`]); the
//! aliases below fix the common choices.

pub mod chain_graph;
pub mod cyclic;
pub mod dc1;
pub mod entropy;
pub mod error;
pub mod report;
pub mod scalar;
pub mod shadowing;
pub mod systems;

pub use error::Error;
pub use scalar::{Exact, Scalar};
pub use systems::{load_system, FiniteSystem, SymbolicPoint, SymbolicSystem, System, SystemError, SystemSpec};

pub type FiniteSystemF32 = FiniteSystem<f32>;
pub type FiniteSystemF64 = FiniteSystem<f64>;
pub type FiniteSystemExact = FiniteSystem<Exact>;
pub type ChainGraphF64 = chain_graph::ChainGraph<f64>;
pub type ChainGraphExact = chain_graph::ChainGraph<Exact>;
pub type LadderF64 = cyclic::EquivalenceLadder<f64>;
pub type LadderExact = cyclic::EquivalenceLadder<Exact>;
