//! Robust power-grid defense planning against a coordinated attacker and
//! adversarial load/wind uncertainty.
//!
//! The planning problem is a min–max–min game: a defender protects branches
//! and generators under a budget, an attacker destroys unprotected elements
//! while "nature" pushes loads and wind availability to the edges of their
//! budget uncertainty sets, and finally the operator re-dispatches a DC
//! network to shed as little load as possible.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the algorithmic
//! core:
//!
//! * [`grid`] – the static problem instance and its validation rules,
//! * [`uncertainty`] – budget uncertainty sets and extreme-point enumeration,
//! * [`dispatch`] – the operator's load-shedding LP,
//! * [`subproblem`] – the attacker/nature problem as a single-level MILP,
//! * [`master`] – the defender's MILP over a growing scenario set,
//! * [`ccg`] – the column-and-constraint generation loop,
//! * [`oracle`] – exhaustive enumeration for small instances,
//! * [`lp`] – the solver abstraction plus a small bundled simplex and
//!   branch-and-bound used when no external engine is available,
//! * [`report`] – table rendering and budget-threshold queries,
//! * [`rts79`] – the modified RTS-79 test system,
//! * [`random`] – seeded generation of small random instances.
//!
//! File formats, the command line, and the binding to an external MILP engine
//! live in the `griddef` companion crate.

#![no_std]
#![deny(missing_debug_implementations)]

extern crate alloc;

pub mod ccg;
pub mod dispatch;
pub mod error;
pub mod grid;
pub mod lp;
pub mod master;
pub mod oracle;
pub mod random;
pub mod report;
pub mod rts79;
pub mod subproblem;
pub mod uncertainty;

#[cfg(test)]
mod testutil;

pub use ccg::{ccg_solve, ccg_solve_observed, gap, CcgObserver, CcgParams, CcgReport, CcgStatus, GapCheck, IterationRecord};
pub use dispatch::{solve_dispatch, survival, AttackPlan, DefensePlan, DispatchResult};
pub use error::{Error, Result, Violation};
pub use grid::{Branch, Budgets, Bus, Generator, GridCase, LoadPoint, WindFarm};
pub use lp::{Backend, LinearModel, SolveOutcome, SolveStatus, SolverError};
pub use master::{solve_master, MasterSolution, Scenario};
pub use oracle::{oracle_solve, OracleCaps, OracleResult};
pub use subproblem::{solve_subproblem, solve_subproblem_hinted, BigMConfig, SubproblemSolution};
pub use uncertainty::{Direction, UncertaintyRealization};

/// Absolute tolerance, in MW, used by every post-check that compares two
/// independently computed shed values.
pub const CHECK_TOL_MW: f64 = 1e-5;
