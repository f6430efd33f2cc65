//! Parameter sweeps: one full C&CG solve per value, run on a thread pool.

use griddef_core::{ccg_solve, CcgParams, CcgReport, CcgStatus, GridCase};
use rayon::prelude::*;

use crate::backend::BackendKind;
use crate::case_io::{check_case, CaseFileError, Overrides};
use crate::report::{ElementIds, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParameter {
    DefenseBudget,
    LoadDeviation,
}

impl SweepParameter {
    pub fn overrides(self, value: f64) -> Overrides {
        match self {
            Self::DefenseBudget => Overrides {
                defense_budget: Some(value),
                ..Overrides::default()
            },
            Self::LoadDeviation => Overrides {
                load_deviation_mw: Some(value),
                ..Overrides::default()
            },
        }
    }
}

/// The case for each sweep point, validated before anything is solved.
pub fn sweep_cases(case: &GridCase, parameter: SweepParameter, values: &[f64]) -> Result<Vec<GridCase>, CaseFileError> {
    values
        .iter()
        .map(|&v| {
            let c = parameter.overrides(v).apply(case);
            check_case(&c, &format!("sweep value {v}"))?;
            Ok(c)
        })
        .collect()
}

/// Solves every case, at most `jobs` at a time. Results keep input order.
pub fn run_cases(
    cases: &[GridCase],
    params: &CcgParams,
    backend: BackendKind,
    jobs: usize,
) -> Vec<griddef_core::Result<CcgReport>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        cases
            .par_iter()
            .map(|c| ccg_solve(c, params, &mut backend.create()))
            .collect()
    })
}

pub fn sweep_row(value: f64, case: &GridCase, outcome: &griddef_core::Result<CcgReport>) -> SweepRow {
    match outcome {
        Ok(r) => SweepRow {
            value,
            load_loss_mw: Some(r.final_loss_mw),
            defended: ElementIds::defended(&r.final_defense, case).compact(),
            attacked: ElementIds::attacked(&r.worst_attack, case).compact(),
            iterations: r.iterations.len(),
            status: r.status.as_str().into(),
        },
        Err(e) => SweepRow {
            value,
            load_loss_mw: None,
            defended: "-".into(),
            attacked: "-".into(),
            iterations: 0,
            status: format!("error: {}", e.to_string().replace(['\n', '\r'], " ")),
        },
    }
}

pub fn run_sweep(
    case: &GridCase,
    parameter: SweepParameter,
    values: &[f64],
    params: &CcgParams,
    backend: BackendKind,
    jobs: usize,
) -> Result<Vec<SweepRow>, CaseFileError> {
    let cases = sweep_cases(case, parameter, values)?;
    let outcomes = run_cases(&cases, params, backend, jobs);
    Ok(values
        .iter()
        .zip(&cases)
        .zip(&outcomes)
        .map(|((&v, c), o)| sweep_row(v, c, o))
        .collect())
}

pub fn row_failed(row: &SweepRow) -> bool {
    row.status != CcgStatus::Converged.as_str()
}
