//! Human-readable summaries and sweep queries.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::ccg::CcgReport;
use crate::grid::GridCase;

/// Comma-separated ids in ascending order, or `N/A` when empty.
pub fn id_list(ids: &[u32]) -> String {
    if ids.is_empty() {
        return String::from("N/A");
    }
    let mut ids = ids.to_vec();
    ids.sort_unstable();
    ids.iter().map(|i| format!("{i}")).collect::<Vec<_>>().join(", ")
}

/// Two-column summary: load loss, defended and attacked lines and
/// generators, all by case id.
pub fn render_table_i_style(report: &CcgReport, case: &GridCase) -> String {
    let rows = [
        ("Load loss (MW)", format!("{:.2}", report.final_loss_mw)),
        ("Defended lines", id_list(&report.final_defense.defended_branch_ids(case))),
        ("Defended generators", id_list(&report.final_defense.defended_gen_ids(case))),
        ("Attacked lines", id_list(&report.worst_attack.attacked_branch_ids(case))),
        ("Attacked generators", id_list(&report.worst_attack.attacked_gen_ids(case))),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<width$}  {v}");
    }
    out
}

/// Smallest parameter value whose loss is strictly below `threshold_mw`,
/// from `(value, loss)` sweep points in any order.
pub fn budget_threshold(points: &[(f64, f64)], threshold_mw: f64) -> Option<f64> {
    points
        .iter()
        .filter(|(_, loss)| *loss < threshold_mw)
        .map(|&(v, _)| v)
        .min_by(f64::total_cmp)
}
