//! JSON case documents.
//!
//! ```json
//! { "format": 1, "name": "three-bus", "case": { "buses": [...], ... } }
//! ```
//!
//! Unknown fields are rejected at every level. Parse errors carry the line
//! and column; validation errors list every violation at once.

use std::fs;
use std::path::{Path, PathBuf};

use griddef_core::{GridCase, Violation};
use serde::{Deserialize, Serialize};

pub const CASE_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseDocument {
    pub format: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub case: GridCase,
}

impl CaseDocument {
    pub fn new(name: impl Into<String>, case: GridCase) -> Self {
        Self {
            format: CASE_FORMAT,
            name: Some(name.into()),
            description: None,
            case,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CaseFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}: unsupported case format {found} (this tool reads format {CASE_FORMAT})")]
    Format { origin: String, found: u32 },
    #[error("{origin}: {} violation(s):\n{}", .violations.len(), list(.violations))]
    Invalid { origin: String, violations: Vec<Violation> },
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n")
}

#[derive(Deserialize)]
struct FormatProbe {
    format: Option<u32>,
}

fn parse_error(origin: &str, e: serde_json::Error) -> CaseFileError {
    CaseFileError::Parse {
        origin: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses and validates a case document; `origin` names it in errors.
pub fn parse_case_document(text: &str, origin: &str) -> Result<CaseDocument, CaseFileError> {
    let probe: FormatProbe = serde_json::from_str(text).map_err(|e| parse_error(origin, e))?;
    match probe.format {
        Some(CASE_FORMAT) => {}
        Some(found) => {
            return Err(CaseFileError::Format {
                origin: origin.to_string(),
                found,
            })
        }
        None => {
            return Err(CaseFileError::Parse {
                origin: origin.to_string(),
                line: 1,
                column: 1,
                message: "missing field `format`".into(),
            })
        }
    }
    let doc: CaseDocument = serde_json::from_str(text).map_err(|e| parse_error(origin, e))?;
    check_case(&doc.case, origin)?;
    Ok(doc)
}

/// Validation with every violation reported.
pub fn check_case(case: &GridCase, origin: &str) -> Result<(), CaseFileError> {
    let violations = case.violations();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CaseFileError::Invalid {
            origin: origin.to_string(),
            violations,
        })
    }
}

pub fn load_case_document(path: &Path) -> Result<CaseDocument, CaseFileError> {
    let text = fs::read_to_string(path).map_err(|source| CaseFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_case_document(&text, &path.display().to_string())
}

pub fn load_case(path: &Path) -> Result<GridCase, CaseFileError> {
    load_case_document(path).map(|d| d.case)
}

pub fn to_json(doc: &CaseDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("case documents always serialize");
    s.push('\n');
    s
}

/// Command-line adjustments layered over a case file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub defense_budget: Option<f64>,
    pub attack_budget: Option<f64>,
    pub load_budget: Option<f64>,
    pub wind_budget: Option<f64>,
    /// Symmetric deviation applied to every load (MW).
    pub load_deviation_mw: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, case: &GridCase) -> GridCase {
        let mut c = case.clone();
        let b = &mut c.budgets;
        if let Some(v) = self.defense_budget {
            b.defense_budget = v;
        }
        if let Some(v) = self.attack_budget {
            b.attack_budget = v;
        }
        if let Some(v) = self.load_budget {
            b.load_uncertainty_budget = v;
        }
        if let Some(v) = self.wind_budget {
            b.wind_uncertainty_budget = v;
        }
        if let Some(dev) = self.load_deviation_mw {
            for l in &mut c.loads {
                l.dev_up_mw = dev;
                l.dev_down_mw = dev;
            }
        }
        c
    }
}
