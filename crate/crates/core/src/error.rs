use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::lp::SolverError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// One violated invariant of a case or a decision vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// The offending item, e.g. `branch 7` or `budgets`.
    pub subject: String,
    pub message: String,
}

impl Violation {
    pub fn new(subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// Display adapter that joins violations with `; `.
#[derive(Debug)]
pub struct Violations<'a>(pub &'a [Violation]);

impl fmt::Display for Violations<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid case ({n} violation(s)): {list}", n = .0.len(), list = Violations(.0))]
    InvalidCase(Vec<Violation>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("plan exceeds budget: {0}")]
    OverBudget(String),

    #[error("solver failure: {0}")]
    Solver(#[from] SolverError),

    #[error("post-check failed for {what}: model reports {model_mw} MW, re-solved dispatch gives {dispatch_mw} MW")]
    PostCheck {
        what: &'static str,
        model_mw: f64,
        dispatch_mw: f64,
    },

    #[error("enumeration of {what} refused: {count} items exceeds the cap of {cap}")]
    SizeCap {
        what: &'static str,
        count: u128,
        cap: u128,
    },

    #[error("scenario already present (attack and realization identical)")]
    DuplicateScenario,

    #[error("master problem needs at least one scenario")]
    EmptyScenarios,

    #[error("lower bound {lb} MW exceeds upper bound {ub} MW")]
    BoundCrossing { lb: f64, ub: f64 },

    #[error("big-M bound for {family} is {value}, below the analytic dual bound {required}")]
    BigMTooSmall {
        family: &'static str,
        value: f64,
        required: f64,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: alloc::boxed::Box::new(self),
        }
    }
}
