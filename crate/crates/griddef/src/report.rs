//! Result documents: `result.json`, `convergence.csv` and `sweep.csv`.

use std::fs;
use std::io;
use std::path::Path;

use griddef_core::uncertainty::Direction;
use griddef_core::{AttackPlan, CcgReport, CcgStatus, DefensePlan, GridCase, UncertaintyRealization};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Bumped whenever a field of any output document changes meaning.
pub const SCHEMA_VERSION: u32 = 1;
pub const RESULT_SCHEMA: &str = include_str!("../schemas/result.schema.json");
pub const SWEEP_SCHEMA: &str = include_str!("../schemas/sweep.schema.json");
pub const CONVERGENCE_SCHEMA: &str = include_str!("../schemas/convergence.schema.json");

/// SHA-256 of the compact JSON encoding of the case actually solved.
pub fn case_fingerprint(case: &GridCase) -> String {
    let bytes = serde_json::to_vec(case).expect("cases always serialize");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetEcho {
    pub defense_budget: f64,
    pub attack_budget: f64,
    pub load_uncertainty_budget: f64,
    pub wind_uncertainty_budget: f64,
}

/// Element ids by kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementIds {
    pub branches: Vec<u32>,
    pub generators: Vec<u32>,
}

impl ElementIds {
    pub fn defended(plan: &DefensePlan, case: &GridCase) -> Self {
        Self::sorted(plan.defended_branch_ids(case), plan.defended_gen_ids(case))
    }

    pub fn attacked(plan: &AttackPlan, case: &GridCase) -> Self {
        Self::sorted(plan.attacked_branch_ids(case), plan.attacked_gen_ids(case))
    }

    fn sorted(mut branches: Vec<u32>, mut generators: Vec<u32>) -> Self {
        branches.sort_unstable();
        generators.sort_unstable();
        Self { branches, generators }
    }

    /// Compact form used in CSV cells: `f:3,7 g:1`, or `-` when empty.
    pub fn compact(&self) -> String {
        let mut parts = Vec::new();
        let join = |ids: &[u32]| ids.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        if !self.branches.is_empty() {
            parts.push(format!("f:{}", join(&self.branches)));
        }
        if !self.generators.is_empty() {
            parts.push(format!("g:{}", join(&self.generators)));
        }
        if parts.is_empty() {
            "-".into()
        } else {
            parts.join(" ")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deviation {
    pub id: u32,
    pub direction: Direction,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationDoc {
    pub loads: Vec<Deviation>,
    pub wind_farms: Vec<Deviation>,
}

impl RealizationDoc {
    pub fn new(r: &UncertaintyRealization, case: &GridCase) -> Self {
        let loads = r
            .active_loads()
            .into_iter()
            .map(|(i, direction)| Deviation {
                id: case.loads[i].id,
                direction,
            })
            .collect();
        let wind_farms = r
            .active_farms()
            .into_iter()
            .map(|(i, direction)| Deviation {
                id: case.wind_farms[i].id,
                direction,
            })
            .collect();
        Self { loads, wind_farms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationDoc {
    pub iter: usize,
    pub lower_bound_mw: f64,
    pub upper_bound_mw: f64,
    pub eta_mw: f64,
    pub defense: ElementIds,
    pub scenario_signature: String,
    pub scenario_added: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub case_name: Option<String>,
    pub case_fingerprint: String,
    pub backend: String,
    pub budgets: BudgetEcho,
    pub status: CcgStatus,
    pub final_loss_mw: f64,
    pub lower_bound_mw: f64,
    pub final_defense: ElementIds,
    pub worst_attack: ElementIds,
    pub worst_realization: RealizationDoc,
    pub iterations: Vec<IterationDoc>,
    pub elapsed_seconds: f64,
}

impl ResultDocument {
    pub fn new(
        report: &CcgReport,
        case: &GridCase,
        case_name: Option<String>,
        backend: &str,
        elapsed_seconds: f64,
    ) -> Self {
        let b = &case.budgets;
        Self {
            schema_version: SCHEMA_VERSION,
            tool: ToolInfo::current(),
            case_name,
            case_fingerprint: case_fingerprint(case),
            backend: backend.into(),
            budgets: BudgetEcho {
                defense_budget: b.defense_budget,
                attack_budget: b.attack_budget,
                load_uncertainty_budget: b.load_uncertainty_budget,
                wind_uncertainty_budget: b.wind_uncertainty_budget,
            },
            status: report.status,
            final_loss_mw: report.final_loss_mw,
            lower_bound_mw: report.lower_bound_mw,
            final_defense: ElementIds::defended(&report.final_defense, case),
            worst_attack: ElementIds::attacked(&report.worst_attack, case),
            worst_realization: RealizationDoc::new(&report.worst_realization, case),
            iterations: report
                .iterations
                .iter()
                .map(|r| IterationDoc {
                    iter: r.iter,
                    lower_bound_mw: r.lower_bound_mw,
                    upper_bound_mw: r.upper_bound_mw,
                    eta_mw: r.eta_mw,
                    defense: ElementIds::defended(&r.defense, case),
                    scenario_signature: r.scenario_signature.clone(),
                    scenario_added: r.scenario_added,
                })
                .collect(),
            elapsed_seconds,
        }
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        fs::write(path, s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub iter: usize,
    pub lower_bound_mw: f64,
    pub upper_bound_mw: f64,
    pub scenario_signature: String,
}

pub fn convergence_rows(report: &CcgReport) -> Vec<ConvergenceRow> {
    report
        .iterations
        .iter()
        .map(|r| ConvergenceRow {
            iter: r.iter,
            lower_bound_mw: r.lower_bound_mw,
            upper_bound_mw: r.upper_bound_mw,
            scenario_signature: r.scenario_signature.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    /// Empty when the point failed.
    pub load_loss_mw: Option<f64>,
    pub defended: String,
    pub attacked: String,
    pub iterations: usize,
    /// A [`CcgStatus`] string, or `error: <message>`.
    pub status: String,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const CONVERGENCE_COLUMNS: [&str; 4] = ["iter", "lower_bound_mw", "upper_bound_mw", "scenario_signature"];
pub const SWEEP_COLUMNS: [&str; 6] = ["value", "load_loss_mw", "defended", "attacked", "iterations", "status"];

pub fn write_convergence(path: &Path, report: &CcgReport) -> Result<(), csv::Error> {
    write_csv(path, &convergence_rows(report), &CONVERGENCE_COLUMNS)
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<(), csv::Error> {
    write_csv(path, rows, &SWEEP_COLUMNS)
}
