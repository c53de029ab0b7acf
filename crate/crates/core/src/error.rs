use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coeff::CoeffDoc;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One failed identity or inclusion, with enough location data to find it in the input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    /// Chart ids involved (pair or triple).
    pub charts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<CoeffDoc>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Violation {
    pub fn new(check: impl Into<String>, charts: &[&str]) -> Self {
        Violation {
            check: check.into(),
            charts: charts.iter().map(|s| s.to_string()).collect(),
            entry: None,
            exponents: None,
            value: None,
            detail: String::new(),
        }
    }

    pub fn entry(mut self, e: impl Into<String>) -> Self {
        self.entry = Some(e.into());
        self
    }

    pub fn at(mut self, exponents: &[u32], value: &crate::coeff::Coeff) -> Self {
        self.exponents = Some(exponents.to_vec());
        self.value = Some(CoeffDoc::from(value));
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.check, self.charts.join(","))?;
        if let Some(e) = &self.entry {
            write!(f, " {e}")?;
        }
        if let (Some(x), Some(v)) = (&self.exponents, &self.value) {
            write!(f, " at {x:?}: {}", v.re)?;
            if v.im != "0" {
                write!(f, " + {}i", v.im)?;
            }
        }
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("composition domain: {0}")]
    CompositionDomain(String),
    #[error("linear part is not invertible")]
    NotInvertible,
    #[error("invalid algebra homomorphism: {0}")]
    InvalidHom(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("validation failed: {summary}")]
    Validation {
        summary: String,
        violations: Vec<Violation>,
    },
    #[error("overlap agreement failed: {summary}")]
    Agreement {
        summary: String,
        violations: Vec<Violation>,
    },
    #[error("certificate incomplete: {0}")]
    CertificateIncomplete(String),
    #[error("shrink exhausted: {0}")]
    ShrinkExhausted(String),
    #[error("coverage lost: {0}")]
    CoverageLoss(String),
    #[error("point outside every chart: {0}")]
    Domain(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code class: 2 validation, 3 gluing obstruction, 4 I/O or schema.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. }
            | Error::Agreement { .. }
            | Error::CompositionDomain(_)
            | Error::NotInvertible
            | Error::InvalidHom(_)
            | Error::CertificateIncomplete(_) => 2,
            Error::ShrinkExhausted(_) | Error::CoverageLoss(_) => 3,
            Error::Shape(_)
            | Error::Dimension { .. }
            | Error::Domain(_)
            | Error::Schema(_)
            | Error::Io(_)
            | Error::Json(_) => 4,
        }
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            Error::Validation { violations, .. } | Error::Agreement { violations, .. } => violations,
            _ => &[],
        }
    }

    pub(crate) fn validation(summary: impl Into<String>, violations: Vec<Violation>) -> Self {
        Error::Validation {
            summary: summary.into(),
            violations,
        }
    }
}
