//! System backends: explicit finite systems, grid-discretized circle and
//! interval maps, shift words, the dyadic odometer and the exact full shift.

mod finite;
mod spec;
mod symbolic;

pub use finite::{Coordinate, FiniteSystem, Metric, SystemMeta, WordMap, MAX_STATES};
pub use spec::{load_system, ScalarInput, SystemSpec, KNOWN_BACKENDS};
pub use symbolic::{agreement_run, SymbolSource, SymbolicPoint, SymbolicSystem, MAX_ALPHABET};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("unknown backend {0:?}")]
    UnknownBackend(String),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("invalid successor relation: {0}")]
    InvalidSuccessors(String),
    #[error("orbits require a single-valued system")]
    Multivalued,
    #[error("state {state} out of range for {n} states")]
    StateOutOfRange { state: usize, n: usize },
    #[error("operation requires a {expected} system")]
    WrongBackend { expected: &'static str },
}

impl SystemError {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        SystemError::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

/// A loaded system: either finite (states `0..n`) or the exact full shift.
#[derive(Debug, Clone)]
pub enum System<T> {
    Finite(FiniteSystem<T>),
    Symbolic(SymbolicSystem),
}

impl<T> System<T> {
    pub fn as_finite(&self) -> Result<&FiniteSystem<T>, SystemError> {
        match self {
            System::Finite(f) => Ok(f),
            System::Symbolic(_) => Err(SystemError::WrongBackend { expected: "finite" }),
        }
    }

    pub fn as_symbolic(&self) -> Result<&SymbolicSystem, SystemError> {
        match self {
            System::Symbolic(s) => Ok(s),
            System::Finite(_) => Err(SystemError::WrongBackend { expected: "symbolic" }),
        }
    }
}
