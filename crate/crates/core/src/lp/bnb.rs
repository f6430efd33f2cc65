//! Depth-first branch-and-bound over binary variables.

use alloc::vec::Vec;

use super::{
    DenseSimplex, LinearModel, ObjSense, SolveOutcome, SolveStats, SolveStatus, SolverError, VarKind,
    INTEGRALITY_TOL, MIP_REL_GAP,
};

#[derive(Debug, Clone)]
pub struct BranchAndBound {
    pub max_nodes: u64,
}

impl Default for BranchAndBound {
    fn default() -> Self {
        Self { max_nodes: 2_000_000 }
    }
}

impl BranchAndBound {
    pub fn solve(&self, lp: &DenseSimplex, model: &LinearModel) -> Result<SolveOutcome, SolverError> {
        let flip = if model.sense == ObjSense::Maximize { -1.0 } else { 1.0 };
        let binaries: Vec<usize> = (0..model.vars.len())
            .filter(|&j| model.vars[j].kind == VarKind::Binary)
            .collect();
        let lower0: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
        let upper0: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();

        let mut stack = alloc::vec![(lower0, upper0)];
        let mut incumbent: Option<(f64, Vec<f64>)> = None;
        let mut stats = SolveStats::default();
        while let Some((lo, hi)) = stack.pop() {
            stats.nodes += 1;
            if stats.nodes > self.max_nodes {
                return Err(SolverError::NodeLimit);
            }
            let out = lp.solve_with_bounds(model, Some((&lo, &hi)))?;
            stats.iterations += out.stats.iterations;
            match out.status {
                SolveStatus::Optimal => {}
                SolveStatus::Infeasible => continue,
                SolveStatus::Unbounded if incumbent.is_none() && stats.nodes == 1 => {
                    return Ok(SolveOutcome::not_optimal(SolveStatus::Unbounded, stats));
                }
                _ => return Err(SolverError::Backend("unexpected LP status in branch-and-bound".into())),
            }
            let z = flip * out.objective;
            if let Some((best, _)) = &incumbent {
                if z >= *best - MIP_REL_GAP * best.abs().max(1.0) {
                    continue;
                }
            }
            let branch_on = binaries
                .iter()
                .copied()
                .map(|j| (j, (out.values[j] - libm::round(out.values[j])).abs()))
                .filter(|&(_, frac)| frac > INTEGRALITY_TOL)
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            match branch_on {
                None => {
                    let mut x = out.values;
                    for &j in &binaries {
                        x[j] = libm::round(x[j]);
                    }
                    incumbent = Some((z, x));
                }
                Some((j, _)) => {
                    let up_first = out.values[j] >= 0.5;
                    let mut down = (lo.clone(), hi.clone());
                    down.1[j] = 0.0;
                    let mut up = (lo, hi);
                    up.0[j] = 1.0;
                    // the child nearer the LP value is explored first
                    if up_first {
                        stack.push(down);
                        stack.push(up);
                    } else {
                        stack.push(up);
                        stack.push(down);
                    }
                }
            }
        }
        match incumbent {
            None => Ok(SolveOutcome::not_optimal(SolveStatus::Infeasible, stats)),
            Some((_, values)) => {
                stats.mip_gap = Some(0.0);
                Ok(SolveOutcome {
                    status: SolveStatus::Optimal,
                    objective: model.objective_value(&values),
                    values,
                    row_duals: None,
                    reduced_costs: None,
                    stats,
                })
            }
        }
    }
}
