use serde::{Deserialize, Serialize};

use super::{FiniteSystem, SymbolicSystem, System, SystemError, WordMap};
use crate::scalar::Scalar;

pub const KNOWN_BACKENDS: &[&str] = &[
    "odometer",
    "doubling",
    "tent",
    "logistic",
    "shift_words",
    "explicit",
    "full_shift",
];

/// A distance given in JSON either as a number or as text (`"1/4"`, `"2^-3"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarInput {
    Number(f64),
    Text(String),
}

impl ScalarInput {
    pub fn to_scalar<T: Scalar>(&self) -> Option<T> {
        match self {
            ScalarInput::Number(x) => T::from_f64(*x),
            ScalarInput::Text(s) => T::parse_scalar(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdometerParams {
    pub k: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    #[serde(rename = "L")]
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordParams {
    #[serde(rename = "L")]
    pub len: usize,
    #[serde(default = "default_alphabet")]
    pub alphabet: usize,
    #[serde(default)]
    pub map: WordMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitParams {
    pub distances: Vec<Vec<ScalarInput>>,
    pub successors: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullShiftParams {
    #[serde(default = "default_alphabet_u8")]
    pub alphabet: u8,
    /// Word length of the finite proxies used for graph-based analyses.
    #[serde(default = "default_word_len")]
    pub word_len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
}

fn default_alphabet() -> usize {
    2
}

fn default_alphabet_u8() -> u8 {
    2
}

fn default_word_len() -> usize {
    8
}

/// JSON system description: `{"backend": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", content = "params", rename_all = "snake_case")]
pub enum SystemSpec {
    Odometer(OdometerParams),
    Doubling(GridParams),
    Tent(GridParams),
    Logistic(GridParams),
    ShiftWords(WordParams),
    Explicit(ExplicitParams),
    FullShift(FullShiftParams),
}

impl SystemSpec {
    /// Parses JSON, reporting unknown backends separately from bad parameters.
    pub fn from_json(text: &str) -> Result<Self, SystemError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| SystemError::invalid("spec", e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, SystemError> {
        let backend = value
            .get("backend")
            .and_then(|b| b.as_str())
            .ok_or_else(|| SystemError::invalid("backend", "missing or not a string"))?;
        if !KNOWN_BACKENDS.contains(&backend) {
            return Err(SystemError::UnknownBackend(backend.to_string()));
        }
        serde_json::from_value(value).map_err(|e| SystemError::invalid("params", e.to_string()))
    }

    pub fn backend(&self) -> &'static str {
        match self {
            SystemSpec::Odometer(_) => "odometer",
            SystemSpec::Doubling(_) => "doubling",
            SystemSpec::Tent(_) => "tent",
            SystemSpec::Logistic(_) => "logistic",
            SystemSpec::ShiftWords(_) => "shift_words",
            SystemSpec::Explicit(_) => "explicit",
            SystemSpec::FullShift(_) => "full_shift",
        }
    }

    fn metric_convention(&self) -> (&'static str, Option<&str>) {
        match self {
            SystemSpec::Odometer(p) => ("dyadic", p.metric.as_deref()),
            SystemSpec::Doubling(p) => ("circle", p.metric.as_deref()),
            SystemSpec::Tent(p) | SystemSpec::Logistic(p) => ("interval", p.metric.as_deref()),
            SystemSpec::ShiftWords(p) => ("prefix", p.metric.as_deref()),
            SystemSpec::FullShift(p) => ("prefix", p.metric.as_deref()),
            SystemSpec::Explicit(_) => ("matrix", None),
        }
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        let (expected, given) = self.metric_convention();
        if let Some(given) = given {
            if given != expected {
                return Err(SystemError::invalid(
                    "metric",
                    format!("backend {} uses the {expected} metric, got {given:?}", self.backend()),
                ));
            }
        }
        if let SystemSpec::FullShift(p) = self {
            if p.word_len == 0 {
                return Err(SystemError::invalid("word_len", "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Materializes the system described by `spec`.
pub fn load_system<T: Scalar>(spec: &SystemSpec) -> Result<System<T>, SystemError> {
    spec.validate()?;
    let system = match spec {
        SystemSpec::Odometer(p) => System::Finite(FiniteSystem::odometer(p.k)?),
        SystemSpec::Doubling(p) => System::Finite(FiniteSystem::doubling(p.size)?),
        SystemSpec::Tent(p) => System::Finite(FiniteSystem::tent(p.size)?),
        SystemSpec::Logistic(p) => System::Finite(FiniteSystem::logistic(p.size)?),
        SystemSpec::ShiftWords(p) => System::Finite(FiniteSystem::shift_words(p.len, p.alphabet, p.map)?),
        SystemSpec::Explicit(p) => {
            let distances = p
                .distances
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(j, v)| {
                            v.to_scalar::<T>().ok_or_else(|| {
                                SystemError::InvalidMetric(format!("entry ({i},{j}) = {v:?} is not a number"))
                            })
                        })
                        .collect::<Result<Vec<T>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            System::Finite(FiniteSystem::explicit(distances, p.successors.clone())?)
        }
        SystemSpec::FullShift(p) => System::Symbolic(SymbolicSystem::new(p.alphabet)?),
    };
    Ok(system)
}
