//! Cross-checks C&CG against brute-force enumeration.

use griddef_core::oracle::OraclePlan;
use griddef_core::random::{random_case, RandomCaseParams};
use griddef_core::{ccg_solve, CcgParams, CcgStatus, GridCase, OracleCaps, OracleResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::backend::BackendKind;

/// Loss agreement required between the two methods (MW).
pub const ORACLE_TOL_MW: f64 = 1e-5;

/// Enumeration with service states evaluated in parallel.
pub fn oracle_solve_parallel(
    case: &GridCase,
    caps: OracleCaps,
    backend: BackendKind,
) -> griddef_core::Result<OracleResult> {
    let plan = OraclePlan::new(case, caps)?;
    let values = plan
        .states
        .par_iter()
        .map_init(|| backend.create(), |b, s| plan.evaluate_state(case, s, b))
        .collect::<griddef_core::Result<Vec<_>>>()?;
    Ok(plan.assemble(&values))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub label: String,
    pub ccg_loss_mw: f64,
    pub oracle_loss_mw: f64,
    pub ccg_status: CcgStatus,
    /// Oracle's worst-case loss for the defense C&CG chose.
    pub ccg_defense_oracle_mw: f64,
}

impl CheckOutcome {
    pub fn difference_mw(&self) -> f64 {
        (self.ccg_loss_mw - self.oracle_loss_mw).abs()
    }

    pub fn passed(&self) -> bool {
        self.ccg_status == CcgStatus::Converged
            && self.difference_mw() <= ORACLE_TOL_MW
            && (self.ccg_defense_oracle_mw - self.oracle_loss_mw).abs() <= ORACLE_TOL_MW
    }
}

/// C&CG runs on `ccg_backend`; the oracle uses `oracle_backend` so the two
/// answers come from independent LP engines when they differ.
pub fn check_case(
    label: impl Into<String>,
    case: &GridCase,
    params: &CcgParams,
    caps: OracleCaps,
    ccg_backend: BackendKind,
    oracle_backend: BackendKind,
) -> griddef_core::Result<CheckOutcome> {
    let oracle = oracle_solve_parallel(case, caps, oracle_backend)?;
    let report = ccg_solve(case, params, &mut ccg_backend.create())?;
    let ccg_defense_oracle_mw = oracle
        .per_defense_table
        .iter()
        .find(|e| e.defense == report.final_defense)
        .map_or(f64::NAN, |e| e.worst_case_loss_mw);
    Ok(CheckOutcome {
        label: label.into(),
        ccg_loss_mw: report.final_loss_mw,
        oracle_loss_mw: oracle.worst_case_loss_mw,
        ccg_status: report.status,
        ccg_defense_oracle_mw,
    })
}

/// `n` instances from one ChaCha8 stream seeded with `seed`.
pub fn random_instances(n: usize, seed: u64) -> Vec<GridCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = RandomCaseParams::default();
    (0..n).map(|_| random_case(&mut rng, &params)).collect()
}
