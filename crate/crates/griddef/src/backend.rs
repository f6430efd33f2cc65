//! Solver backends: HiGHS for real work, the bundled engine as fallback.

use std::time::Instant;

use griddef_core::lp::{
    Backend, LinearModel, ObjSense, PureBackend, RowSense, SolveOutcome, SolveStats, SolveStatus, SolverError,
    VarKind, MIP_REL_GAP,
};
use highs::{HighsModelStatus, RowProblem, Sense};

/// Environment variable selecting the backend (`highs` or `pure`).
pub const BACKEND_ENV: &str = "GRIDDEF_BACKEND";

/// Set to any value to let HiGHS print its log.
pub const LOG_ENV: &str = "GRIDDEF_HIGHS_LOG";

/// Absolute MIP gap handed to HiGHS, per unit of objective.
const MIP_ABS_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Highs,
    Pure,
}

impl BackendKind {
    /// Reads [`BACKEND_ENV`]; HiGHS when unset.
    pub fn from_env() -> Result<Self, String> {
        match std::env::var(BACKEND_ENV) {
            Err(_) => Ok(Self::Highs),
            Ok(v) => v.parse(),
        }
    }

    pub fn create(self) -> Box<dyn Backend + Send> {
        match self {
            Self::Highs => Box::new(HighsBackend::default()),
            Self::Pure => Box::new(PureBackend::default()),
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "highs" | "" => Ok(Self::Highs),
            "pure" => Ok(Self::Pure),
            other => Err(format!("unknown backend {other:?} (expected highs or pure)")),
        }
    }
}

/// HiGHS through its C API. Single-threaded with a fixed random seed so
/// repeated solves of the same model follow the same path.
#[derive(Debug, Clone)]
pub struct HighsBackend {
    pub mip_rel_gap: f64,
    pub random_seed: i32,
}

impl Default for HighsBackend {
    fn default() -> Self {
        Self {
            mip_rel_gap: MIP_REL_GAP,
            random_seed: 0,
        }
    }
}

impl HighsBackend {
    fn solve(&self, model: &LinearModel, integer: bool, warm: Option<&[f64]>) -> Result<SolveOutcome, SolverError> {
        let start = Instant::now();
        let c = model.objective_dense();
        let mut p = RowProblem::default();
        let cols: Vec<_> = model
            .vars
            .iter()
            .zip(&c)
            .map(|(v, &cost)| {
                let binary = integer && v.kind == VarKind::Binary;
                p.add_column_with_integrality(cost, v.lower..=v.upper, binary)
            })
            .collect();
        for r in &model.rows {
            let terms: Vec<_> = r.terms.iter().map(|&(v, a)| (cols[v.0], a)).collect();
            match r.sense {
                RowSense::Le => p.add_row(..=r.rhs, terms),
                RowSense::Ge => p.add_row(r.rhs.., terms),
                RowSense::Eq => p.add_row(r.rhs..=r.rhs, terms),
            }
        }
        let sense = match model.sense {
            ObjSense::Minimize => Sense::Minimise,
            ObjSense::Maximize => Sense::Maximise,
        };
        let mut m = p.try_optimise(sense).map_err(|e| SolverError::Backend(format!("{e:?}")))?;
        if std::env::var_os(LOG_ENV).is_some() {
            m.set_option("output_flag", true);
            m.set_option("log_to_console", true);
        } else {
            m.make_quiet();
        }
        m.set_option("threads", 1);
        m.set_option("random_seed", self.random_seed);
        m.set_option("primal_feasibility_tolerance", 1e-9);
        m.set_option("dual_feasibility_tolerance", 1e-9);
        if integer {
            m.set_option("mip_rel_gap", self.mip_rel_gap);
            m.set_option("mip_abs_gap", MIP_ABS_GAP);
            m.set_option("mip_feasibility_tolerance", 1e-9);
        }
        if let Some(x) = warm {
            m.try_set_solution(Some(x), None, None, None)
                .map_err(|e| SolverError::Backend(format!("warm start rejected: {e:?}")))?;
        }
        let solved = m.try_solve().map_err(|e| SolverError::Backend(format!("{e:?}")))?;
        let mut stats = SolveStats {
            seconds: Some(start.elapsed().as_secs_f64()),
            ..SolveStats::default()
        };
        let status = solved.status();
        match status {
            HighsModelStatus::Optimal => {}
            HighsModelStatus::ModelEmpty => {
                // no columns: the objective is the offset
                return Ok(SolveOutcome {
                    status: SolveStatus::Optimal,
                    objective: model.objective_offset,
                    values: Vec::new(),
                    row_duals: (!integer).then(|| vec![0.0; model.rows.len()]),
                    reduced_costs: (!integer).then(Vec::new),
                    stats,
                });
            }
            HighsModelStatus::Infeasible => return Ok(SolveOutcome::not_optimal(SolveStatus::Infeasible, stats)),
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => {
                return Ok(SolveOutcome::not_optimal(SolveStatus::Unbounded, stats))
            }
            HighsModelStatus::ReachedIterationLimit => return Err(SolverError::IterationLimit),
            other => return Err(SolverError::Backend(format!("HiGHS model status {other:?}"))),
        }
        let sol = solved.get_solution();
        let values = sol.columns().to_vec();
        let objective = model.objective_value(&values);
        if integer {
            // HiGHS stops at either gap; express the result as a relative
            // gap against max(1, |objective|)
            let rel = solved.mip_gap();
            let scale = objective.abs().max(1.0);
            stats.mip_gap = Some(if rel.is_finite() { rel * objective.abs() / scale } else { 0.0 });
            return Ok(SolveOutcome {
                status: SolveStatus::Optimal,
                objective,
                values,
                row_duals: None,
                reduced_costs: None,
                stats,
            });
        }
        Ok(SolveOutcome {
            status: SolveStatus::Optimal,
            objective,
            values,
            row_duals: Some(sol.dual_rows().to_vec()),
            reduced_costs: Some(sol.dual_columns().to_vec()),
            stats,
        })
    }
}

impl Backend for HighsBackend {
    fn name(&self) -> &str {
        "highs"
    }

    fn solve_lp(&mut self, model: &LinearModel) -> Result<SolveOutcome, SolverError> {
        if model.has_integers() {
            return Err(SolverError::IntegerInLp);
        }
        self.solve(model, false, None)
    }

    fn solve_milp(&mut self, model: &LinearModel) -> Result<SolveOutcome, SolverError> {
        self.solve(model, true, None)
    }

    fn solve_milp_from(&mut self, model: &LinearModel, start: &[f64]) -> Result<SolveOutcome, SolverError> {
        self.solve(model, true, Some(start))
    }
}
