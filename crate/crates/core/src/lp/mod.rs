//! Solver-independent linear models and the backend contract.
//!
//! Dual sign convention (both for the bundled solver and any external
//! engine): a row dual is the sensitivity of the optimal objective to that
//! row's right-hand side, and a variable's reduced cost is
//! `c_j - sum_r a_rj * y_r`. For a minimization this makes `<=` duals
//! non-positive and `>=` duals non-negative, and the dual objective
//! `sum_r y_r b_r + sum_j r_j * (bound of x_j selected by the sign of r_j)`
//! equals the primal optimum. [`dual_objective`] evaluates that expression.

mod bnb;
mod simplex;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use bnb::BranchAndBound;
pub use simplex::DenseSimplex;

/// Integrality tolerance used when reading binaries back.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Required relative MIP gap for every MILP solve.
pub const MIP_REL_GAP: f64 = 1e-9;
/// Largest accepted ratio between the largest and smallest constraint
/// coefficient magnitudes.
pub const MAX_COEFFICIENT_RATIO: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Structured, allocation-free names: `<prefix>_<id>` or
/// `<prefix>_<id>_s<scenario>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Name {
    pub prefix: &'static str,
    pub id: u32,
    pub scenario: Option<u32>,
}

impl Name {
    pub const fn new(prefix: &'static str, id: u32) -> Self {
        Self {
            prefix,
            id,
            scenario: None,
        }
    }

    pub const fn scalar(prefix: &'static str) -> Self {
        Self {
            prefix,
            id: u32::MAX,
            scenario: None,
        }
    }

    pub const fn in_scenario(prefix: &'static str, id: u32, scenario: u32) -> Self {
        Self {
            prefix,
            id,
            scenario: Some(scenario),
        }
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.prefix)?;
        if self.id != u32::MAX {
            write!(f, "_{}", self.id)?;
        }
        if let Some(s) = self.scenario {
            write!(f, "_s{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: Name,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for RowSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: Name,
    pub terms: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjSense {
    Minimize,
    Maximize,
}

/// A linear or mixed-binary program.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub sense: ObjSense,
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    pub objective: Vec<(VarId, f64)>,
    pub objective_offset: f64,
}

impl LinearModel {
    pub fn new(sense: ObjSense) -> Self {
        Self {
            sense,
            vars: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            objective_offset: 0.0,
        }
    }

    pub fn continuous(&mut self, name: Name, lower: f64, upper: f64) -> VarId {
        self.vars.push(Variable {
            name,
            kind: VarKind::Continuous,
            lower,
            upper,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn binary(&mut self, name: Name) -> VarId {
        self.vars.push(Variable {
            name,
            kind: VarKind::Binary,
            lower: 0.0,
            upper: 1.0,
        });
        VarId(self.vars.len() - 1)
    }

    /// Adds a row; zero coefficients are dropped.
    pub fn row(&mut self, name: Name, terms: impl IntoIterator<Item = (VarId, f64)>, sense: RowSense, rhs: f64) -> usize {
        let terms = terms.into_iter().filter(|&(_, a)| a != 0.0).collect();
        self.rows.push(Row {
            name,
            terms,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn add_objective(&mut self, var: VarId, coef: f64) {
        if coef != 0.0 {
            self.objective.push((var, coef));
        }
    }

    pub fn fix(&mut self, var: VarId, value: f64) {
        let v = &mut self.vars[var.0];
        v.lower = value;
        v.upper = value;
    }

    pub fn has_integers(&self) -> bool {
        self.vars.iter().any(|v| v.kind == VarKind::Binary)
    }

    pub fn binary_count(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Dense objective vector (duplicate entries summed).
    pub fn objective_dense(&self) -> Vec<f64> {
        let mut c = alloc::vec![0.0; self.vars.len()];
        for &(v, a) in &self.objective {
            c[v.0] += a;
        }
        c
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().map(|&(v, a)| a * x[v.0]).sum::<f64>()
    }

    /// Largest constraint violation of `x` (rows and bounds).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xv) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - xv).max(xv - v.upper);
        }
        for r in &self.rows {
            let lhs: f64 = r.terms.iter().map(|&(v, a)| a * x[v.0]).sum();
            let viol = match r.sense {
                RowSense::Le => lhs - r.rhs,
                RowSense::Ge => r.rhs - lhs,
                RowSense::Eq => (lhs - r.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Rejects models whose constraint coefficients span more than
    /// [`MAX_COEFFICIENT_RATIO`].
    pub fn lint(&self) -> Result<(), SolverError> {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for r in &self.rows {
            for &(_, a) in &r.terms {
                let a = a.abs();
                lo = lo.min(a);
                hi = hi.max(a);
            }
        }
        if hi > 0.0 && hi / lo >= MAX_COEFFICIENT_RATIO {
            return Err(SolverError::BadScaling { ratio: hi / lo });
        }
        Ok(())
    }

    pub fn find_var(&self, name: &Name) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == *name).map(VarId)
    }

    /// Algebraic text dump: objective, one line per constraint
    /// (`name: coef*var + ... sense rhs`), then bounds and binaries.
    pub fn write_dump(&self, out: &mut impl fmt::Write) -> fmt::Result {
        let sense = match self.sense {
            ObjSense::Minimize => "minimize",
            ObjSense::Maximize => "maximize",
        };
        write!(out, "{sense} obj:")?;
        self.write_terms(out, &self.objective)?;
        if self.objective_offset != 0.0 {
            write!(out, " + {}", self.objective_offset)?;
        }
        writeln!(out)?;
        writeln!(out, "subject to")?;
        for r in &self.rows {
            write!(out, "{}:", r.name)?;
            self.write_terms(out, &r.terms)?;
            writeln!(out, " {} {}", r.sense, r.rhs)?;
        }
        writeln!(out, "bounds")?;
        for v in &self.vars {
            writeln!(out, "{} <= {} <= {}", v.lower, v.name, v.upper)?;
        }
        writeln!(out, "binary")?;
        for v in self.vars.iter().filter(|v| v.kind == VarKind::Binary) {
            writeln!(out, "{}", v.name)?;
        }
        writeln!(out, "end")
    }

    fn write_terms(&self, out: &mut impl fmt::Write, terms: &[(VarId, f64)]) -> fmt::Result {
        if terms.is_empty() {
            return out.write_str(" 0");
        }
        for (i, &(v, a)) in terms.iter().enumerate() {
            let name = self.vars[v.0].name;
            if i == 0 {
                write!(out, " {a}*{name}")?;
            } else if a < 0.0 {
                write!(out, " - {}*{name}", -a)?;
            } else {
                write!(out, " + {a}*{name}")?;
            }
        }
        Ok(())
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = self.write_dump(&mut s);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Error,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolveStats {
    pub iterations: u64,
    pub nodes: u64,
    pub seconds: Option<f64>,
    /// Final relative MIP gap reported by the engine (MILP only).
    pub mip_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    /// Row duals (LP only), in the crate convention.
    pub row_duals: Option<Vec<f64>>,
    /// Reduced costs (LP only).
    pub reduced_costs: Option<Vec<f64>>,
    pub stats: SolveStats,
}

impl SolveOutcome {
    pub fn not_optimal(status: SolveStatus, stats: SolveStats) -> Self {
        Self {
            status,
            objective: f64::NAN,
            values: Vec::new(),
            row_duals: None,
            reduced_costs: None,
            stats,
        }
    }

    pub fn require_optimal(self) -> Result<Self, SolverError> {
        match self.status {
            SolveStatus::Optimal => Ok(self),
            SolveStatus::Infeasible => Err(SolverError::Infeasible),
            SolveStatus::Unbounded => Err(SolverError::Unbounded),
            SolveStatus::Error => Err(SolverError::Backend(String::from("solver reported an error status"))),
        }
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    /// Binary value rounded at [`INTEGRALITY_TOL`].
    pub fn flag(&self, v: VarId) -> bool {
        self.values[v.0] > 0.5
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("model is infeasible")]
    Infeasible,
    #[error("model is unbounded")]
    Unbounded,
    #[error("LP solve called on a model with integer variables")]
    IntegerInLp,
    #[error("iteration limit reached")]
    IterationLimit,
    #[error("node limit reached before the MIP gap closed")]
    NodeLimit,
    #[error("MIP gap {gap:e} not within the required {required:e}")]
    GapNotAchieved { gap: f64, required: f64 },
    #[error("binary variable {name} returned fractional value {value}")]
    FractionalBinary { name: String, value: f64 },
    #[error("coefficient range ratio {ratio:e} exceeds the linter limit")]
    BadScaling { ratio: f64 },
    #[error("strong-duality self-test failed: primal {primal}, dual {dual}")]
    DualityGap { primal: f64, dual: f64 },
    #[error("backend error: {0}")]
    Backend(String),
}

/// A narrow LP/MILP engine interface. One solve at a time per instance.
pub trait Backend {
    fn name(&self) -> &str;

    /// Solves a pure LP, returning duals and reduced costs on optimality.
    fn solve_lp(&mut self, model: &LinearModel) -> Result<SolveOutcome, SolverError>;

    /// Solves a MILP to a proven optimum within [`MIP_REL_GAP`].
    fn solve_milp(&mut self, model: &LinearModel) -> Result<SolveOutcome, SolverError>;

    /// Like [`Backend::solve_milp`], with a feasible point the engine may use
    /// as its first incumbent. Engines without warm starts ignore it.
    fn solve_milp_from(&mut self, model: &LinearModel, start: &[f64]) -> Result<SolveOutcome, SolverError> {
        let _ = start;
        self.solve_milp(model)
    }
}

impl<B: Backend + ?Sized> Backend for &mut B {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn solve_lp(&mut self, model: &LinearModel) -> Result<SolveOutcome, SolverError> {
        (**self).solve_lp(model)
    }

    fn solve_milp(&mut self, model: &LinearModel) -> Result<SolveOutcome, SolverError> {
        (**self).solve_milp(model)
    }

    fn solve_milp_from(&mut self, model: &LinearModel, start: &[f64]) -> Result<SolveOutcome, SolverError> {
        (**self).solve_milp_from(model, start)
    }
}

impl<B: Backend + ?Sized> Backend for alloc::boxed::Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn solve_lp(&mut self, model: &LinearModel) -> Result<SolveOutcome, SolverError> {
        (**self).solve_lp(model)
    }

    fn solve_milp(&mut self, model: &LinearModel) -> Result<SolveOutcome, SolverError> {
        (**self).solve_milp(model)
    }

    fn solve_milp_from(&mut self, model: &LinearModel, start: &[f64]) -> Result<SolveOutcome, SolverError> {
        (**self).solve_milp_from(model, start)
    }
}

/// Solves a MILP, then fixes every binary to its rounded value and re-solves
/// the remaining LP so continuous values and the objective carry no
/// integrality leakage through big-M rows.
pub fn solve_milp_polished(backend: &mut dyn Backend, model: &LinearModel) -> Result<SolveOutcome, SolverError> {
    solve_milp_polished_from(backend, model, None)
}

/// [`solve_milp_polished`] with an optional warm start.
pub fn solve_milp_polished_from(
    backend: &mut dyn Backend,
    model: &LinearModel,
    start: Option<&[f64]>,
) -> Result<SolveOutcome, SolverError> {
    let first = match start {
        Some(x) => backend.solve_milp_from(model, x)?,
        None => backend.solve_milp(model)?,
    }
    .require_optimal()?;
    if let Some(gap) = first.stats.mip_gap {
        if gap > MIP_REL_GAP {
            return Err(SolverError::GapNotAchieved {
                gap,
                required: MIP_REL_GAP,
            });
        }
    }
    let fixed = fix_binaries(model, &first.values)?;
    let mut polished = backend.solve_lp(&fixed)?.require_optimal()?;
    polished.stats.nodes = first.stats.nodes;
    polished.stats.mip_gap = first.stats.mip_gap;
    polished.row_duals = None;
    polished.reduced_costs = None;
    for (j, v) in model.vars.iter().enumerate() {
        if v.kind == VarKind::Binary {
            polished.values[j] = fixed.vars[j].lower;
        }
    }
    Ok(polished)
}

/// Copy of `model` with every binary fixed to its (rounded) value in `x`,
/// leaving an LP.
pub fn fix_binaries(model: &LinearModel, x: &[f64]) -> Result<LinearModel, SolverError> {
    let mut fixed = model.clone();
    for (j, v) in model.vars.iter().enumerate() {
        if v.kind == VarKind::Binary {
            let r = libm::round(x[j]);
            if (x[j] - r).abs() > INTEGRALITY_TOL {
                return Err(SolverError::FractionalBinary {
                    name: alloc::format!("{}", v.name),
                    value: x[j],
                });
            }
            fixed.vars[j].kind = VarKind::Continuous;
            fixed.vars[j].lower = r;
            fixed.vars[j].upper = r;
        }
    }
    Ok(fixed)
}

/// Dual objective `sum_r y_r b_r + sum_j r_j * bound_j` assembled from an LP
/// outcome, where `bound_j` is the bound of `x_j` that the sign of its
/// reduced cost selects. Infinite if the reduced costs point at a missing
/// bound.
pub fn dual_objective(model: &LinearModel, outcome: &SolveOutcome) -> Option<f64> {
    let y = outcome.row_duals.as_ref()?;
    let r = outcome.reduced_costs.as_ref()?;
    let mut total = model.objective_offset;
    for (row, &yr) in model.rows.iter().zip(y) {
        total += yr * row.rhs;
    }
    let minimize = model.sense == ObjSense::Minimize;
    for (v, &rj) in model.vars.iter().zip(r) {
        if rj.abs() <= 1e-12 {
            continue;
        }
        // min: r > 0 pushes x to its lower bound; max: r > 0 to its upper.
        let bound = if (rj > 0.0) == minimize { v.lower } else { v.upper };
        total += rj * bound;
    }
    Some(total)
}

/// Strong-duality self-test for one LP outcome.
pub fn check_strong_duality(model: &LinearModel, outcome: &SolveOutcome, tol: f64) -> Result<(), SolverError> {
    let dual = dual_objective(model, outcome).unwrap_or(f64::NAN);
    let scale = 1.0f64.max(outcome.objective.abs());
    if (dual - outcome.objective).abs() <= tol * scale {
        Ok(())
    } else {
        Err(SolverError::DualityGap {
            primal: outcome.objective,
            dual,
        })
    }
}

/// The bundled solver: dense bounded simplex for LPs and depth-first
/// branch-and-bound on top of it for MILPs. Intended for small models.
#[derive(Debug, Clone, Default)]
pub struct PureBackend {
    pub simplex: DenseSimplex,
    pub bnb: BranchAndBound,
}

impl Backend for PureBackend {
    fn name(&self) -> &str {
        "pure"
    }

    fn solve_lp(&mut self, model: &LinearModel) -> Result<SolveOutcome, SolverError> {
        if model.has_integers() {
            return Err(SolverError::IntegerInLp);
        }
        self.simplex.solve(model)
    }

    fn solve_milp(&mut self, model: &LinearModel) -> Result<SolveOutcome, SolverError> {
        self.bnb.solve(&self.simplex, model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_lp_dual() {
        let mut m = LinearModel::new(ObjSense::Minimize);
        let x = m.continuous(Name::new("x", 1), f64::NEG_INFINITY, f64::INFINITY);
        m.add_objective(x, 1.0);
        m.row(Name::new("c", 1), [(x, 1.0)], RowSense::Ge, 3.0);
        let out = PureBackend::default().solve_lp(&m).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.objective - 3.0).abs() < 1e-12);
        assert!((out.row_duals.as_ref().unwrap()[0] - 1.0).abs() < 1e-12);
        check_strong_duality(&m, &out, 1e-9).unwrap();
    }

    #[test]
    fn max_binary() {
        let mut m = LinearModel::new(ObjSense::Maximize);
        let x = m.binary(Name::new("x", 1));
        m.add_objective(x, 1.0);
        let out = PureBackend::default().solve_milp(&m).unwrap();
        assert_eq!(out.objective, 1.0);
        assert_eq!(out.values[0], 1.0);
    }

    #[test]
    fn knapsack_three_items() {
        let mut m = LinearModel::new(ObjSense::Maximize);
        let items: Vec<VarId> = (1..=3).map(|i| m.binary(Name::new("item", i))).collect();
        for (&v, value) in items.iter().zip([3.0, 2.0, 1.0]) {
            m.add_objective(v, value);
        }
        m.row(Name::scalar("budget"), items.iter().map(|&v| (v, 1.0)), RowSense::Le, 2.0);
        let out = solve_milp_polished(&mut PureBackend::default(), &m).unwrap();
        assert!((out.objective - 5.0).abs() < 1e-9);
        assert_eq!(out.values, [1.0, 1.0, 0.0]);
    }

    #[test]
    fn lint_rejects_wide_ranges() {
        let mut m = LinearModel::new(ObjSense::Minimize);
        let x = m.continuous(Name::new("x", 1), 0.0, 1.0);
        let y = m.continuous(Name::new("y", 1), 0.0, 1.0);
        m.row(Name::new("r", 1), [(x, 1e-3), (y, 1e4)], RowSense::Le, 1.0);
        assert!(matches!(m.lint(), Err(SolverError::BadScaling { .. })));
        m.rows[0].terms[0].1 = 1e-1;
        m.lint().unwrap();
    }

    #[test]
    fn dump_format() {
        let mut m = LinearModel::new(ObjSense::Minimize);
        let x = m.continuous(Name::in_scenario("pg", 3, 2), 0.0, 1.0);
        let w = m.binary(Name::new("w_g", 3));
        m.add_objective(x, 1.0);
        m.row(Name::new("gen_on", 3), [(x, 1.0), (w, -2.5)], RowSense::Le, 0.0);
        let d = m.dump();
        assert!(d.contains("gen_on_3: 1*pg_3_s2 - 2.5*w_g_3 <= 0"), "{d}");
        assert!(d.contains("binary\nw_g_3\n"));
    }
}
