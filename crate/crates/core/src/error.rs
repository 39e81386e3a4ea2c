use serde::Serialize;
use thiserror::Error;

use crate::cyclic::CyclicError;
use crate::dc1::Dc1Error;
use crate::entropy::EntropyError;
use crate::shadowing::ShadowError;
use crate::systems::SystemError;

/// Any failure, tagged with the module that raised it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("systems: {0}")]
    System(#[from] SystemError),
    #[error("cyclic: {0}")]
    Cyclic(#[from] CyclicError),
    #[error("shadowing: {0}")]
    Shadow(#[from] ShadowError),
    #[error("dc1: {0}")]
    Dc1(#[from] Dc1Error),
    #[error("entropy: {0}")]
    Entropy(#[from] EntropyError),
    #[error("config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorReport {
    pub module: &'static str,
    pub message: String,
}

impl Error {
    pub fn module(&self) -> &'static str {
        match self {
            Error::System(_) => "systems",
            Error::Cyclic(_) => "cyclic",
            Error::Shadow(_) => "shadowing",
            Error::Dc1(_) => "dc1",
            Error::Entropy(_) => "entropy",
            Error::Config(_) => "config",
        }
    }

    pub fn report(&self) -> ErrorReport {
        let full = self.to_string();
        let message = full
            .strip_prefix(&format!("{}: ", self.module()))
            .unwrap_or(&full)
            .to_string();
        ErrorReport {
            module: self.module(),
            message,
        }
    }
}
