//! The instance file: market shape, valuation tables, declared capabilities.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{AgentId, MarketShape};
use crate::rational::{format_rational, parse_rational, Rational};
use crate::valuation::{Capabilities, Capability, ValuationOracle, ValueMatrix};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read or write instance: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed instance JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid instance: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueMode {
    /// One matrix for all timesteps.
    Static,
    /// One matrix per timestep, reused cyclically past the end.
    Scripted,
}

/// A market plus its valuation schedule; serves as a [`ValuationOracle`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub shape: MarketShape,
    pub a: Option<Rational>,
    pub mode: ValueMode,
    pub matrices: Vec<ValueMatrix>,
    pub declared: Vec<Capability>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    #[serde(default = "default_format")]
    format: u32,
    n: usize,
    m: usize,
    a: Option<String>,
    mode: ValueMode,
    values: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    capabilities: Vec<Capability>,
}

fn default_format() -> u32 {
    FORMAT_VERSION
}

type TextMatrix = Vec<Vec<String>>;

impl Instance {
    pub fn new_static(values: ValueMatrix, a: Option<Rational>, declared: Vec<Capability>) -> Self {
        Instance {
            shape: values.shape(),
            a,
            mode: ValueMode::Static,
            matrices: vec![values],
            declared,
        }
    }

    pub fn new_scripted(matrices: Vec<ValueMatrix>, a: Option<Rational>, declared: Vec<Capability>) -> Self {
        assert!(!matrices.is_empty(), "scripted instances need at least one matrix");
        Instance {
            shape: matrices[0].shape(),
            a,
            mode: ValueMode::Scripted,
            matrices,
            declared,
        }
    }

    /// The matrix in force at timestep `t >= 1`.
    pub fn matrix(&self, t: u64) -> &ValueMatrix {
        match self.mode {
            ValueMode::Static => &self.matrices[0],
            ValueMode::Scripted => {
                let k = (t.max(1) - 1) as usize % self.matrices.len();
                &self.matrices[k]
            }
        }
    }

    pub fn declares(&self, cap: Capability) -> bool {
        self.capabilities().declares(cap)
    }

    pub fn to_json(&self) -> String {
        let text = |m: &ValueMatrix| -> TextMatrix {
            m.to_full()
                .iter()
                .map(|r| r.iter().map(format_rational).collect())
                .collect()
        };
        let values = match self.mode {
            ValueMode::Static => serde_json::to_value(text(&self.matrices[0])),
            ValueMode::Scripted => serde_json::to_value(self.matrices.iter().map(text).collect::<Vec<_>>()),
        }
        .expect("string matrices always serialize");
        let file = InstanceFile {
            format: FORMAT_VERSION,
            n: self.shape.n,
            m: self.shape.m,
            a: self.a.as_ref().map(format_rational),
            mode: self.mode,
            values,
            capabilities: self.declared.clone(),
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        if file.format != FORMAT_VERSION {
            return Err(InstanceError::Invalid(format!(
                "unsupported format {} (expected {FORMAT_VERSION})",
                file.format
            )));
        }
        let shape = MarketShape::new(file.n, file.m).map_err(|e| InstanceError::Invalid(e.to_string()))?;
        let a = file
            .a
            .as_deref()
            .map(parse_rational)
            .transpose()
            .map_err(|e| InstanceError::Invalid(e.to_string()))?;
        let parse_matrix = |m: TextMatrix| -> Result<ValueMatrix, InstanceError> {
            let full = m
                .iter()
                .map(|row| row.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| InstanceError::Invalid(e.to_string()))?;
            let matrix = ValueMatrix::from_full(shape, &full).map_err(InstanceError::Invalid)?;
            for (i, j) in ValueMatrix::cross_pairs(shape) {
                if matrix.get(i, j) < Rational::from_integer(0) {
                    return Err(InstanceError::Invalid(format!(
                        "negative value for ({i}, {j}); clamp to 0 before ingestion"
                    )));
                }
            }
            Ok(matrix)
        };
        let matrices = match file.mode {
            ValueMode::Static => vec![parse_matrix(serde_json::from_value(file.values)?)?],
            ValueMode::Scripted => {
                let ms: Vec<TextMatrix> = serde_json::from_value(file.values)?;
                if ms.is_empty() {
                    return Err(InstanceError::Invalid("scripted instance has no matrices".into()));
                }
                ms.into_iter().map(parse_matrix).collect::<Result<_, _>>()?
            }
        };
        Ok(Instance {
            shape,
            a,
            mode: file.mode,
            matrices,
            declared: file.capabilities,
        })
    }

    pub fn load(path: &Path) -> Result<Self, InstanceError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), InstanceError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

impl ValuationOracle for Instance {
    fn shape(&self) -> MarketShape {
        self.shape
    }

    fn value(&self, t: u64, i: AgentId, j: AgentId) -> Rational {
        self.matrix(t).get(i, j)
    }

    fn capabilities(&self) -> Capabilities {
        let has = |c| self.declared.contains(&c);
        Capabilities {
            is_static: self.mode == ValueMode::Static || has(Capability::Static),
            symmetric: has(Capability::Symmetric),
            binary: has(Capability::Binary),
            binary01: has(Capability::Binary01),
            a: self.a,
        }
    }
}
