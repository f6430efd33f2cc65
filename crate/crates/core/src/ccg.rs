//! Column-and-constraint generation: alternate the master and the
//! subproblem until the bounds meet.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dispatch::{AttackPlan, DefensePlan};
use crate::error::{Error, Result};
use crate::grid::GridCase;
use crate::lp::Backend;
use crate::master::{add_scenario, solve_master, Scenario};
use crate::subproblem::{solve_subproblem_hinted, BigMConfig};
use crate::uncertainty::UncertaintyRealization;

/// Bounds may cross by this much (MW) before it counts as a bug.
pub const CROSSING_TOL_MW: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcgParams {
    pub gap_abs: f64,
    pub gap_rel: f64,
    pub max_iterations: usize,
    pub bigm: BigMConfig,
}

impl Default for CcgParams {
    fn default() -> Self {
        Self {
            gap_abs: 1e-4,
            gap_rel: 1e-6,
            max_iterations: 100,
            bigm: BigMConfig::default(),
        }
    }
}

impl CcgParams {
    pub fn check(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.gap_abs) || !ok(self.gap_rel) || (self.gap_abs == 0.0 && self.gap_rel == 0.0) {
            return Err(Error::Domain(alloc::format!(
                "gap tolerances must be non-negative with one positive, got abs {} rel {}",
                self.gap_abs,
                self.gap_rel
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be at least 1".into()));
        }
        self.bigm.check()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CcgStatus {
    Converged,
    IterationLimit,
    Stalled,
}

impl CcgStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CcgStatus::Converged => "converged",
            CcgStatus::IterationLimit => "iteration-limit",
            CcgStatus::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapCheck {
    pub value: f64,
    pub converged: bool,
}

/// Gap between the bounds and whether it meets the tolerance.
pub fn gap(lb: f64, ub: f64, params: &CcgParams) -> Result<GapCheck> {
    if lb > ub + CROSSING_TOL_MW {
        return Err(Error::BoundCrossing { lb, ub });
    }
    let value = ub - lb;
    Ok(GapCheck {
        value,
        converged: value <= params.gap_abs.max(params.gap_rel * ub),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub iter: usize,
    pub lower_bound_mw: f64,
    /// Best upper bound so far.
    pub upper_bound_mw: f64,
    /// Subproblem value at this iteration's defense.
    pub eta_mw: f64,
    pub defense: DefensePlan,
    /// Key of the scenario the subproblem returned.
    pub scenario_signature: String,
    pub scenario_added: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcgReport {
    pub iterations: Vec<IterationRecord>,
    pub final_defense: DefensePlan,
    pub final_loss_mw: f64,
    pub lower_bound_mw: f64,
    pub worst_attack: AttackPlan,
    pub worst_realization: UncertaintyRealization,
    pub status: CcgStatus,
}

/// Receives each iteration as soon as it completes.
pub trait CcgObserver {
    fn on_iteration(&mut self, record: &IterationRecord);
}

impl CcgObserver for () {
    fn on_iteration(&mut self, _: &IterationRecord) {}
}

impl<F: FnMut(&IterationRecord)> CcgObserver for F {
    fn on_iteration(&mut self, record: &IterationRecord) {
        self(record)
    }
}

pub fn ccg_solve(case: &GridCase, params: &CcgParams, backend: &mut dyn Backend) -> Result<CcgReport> {
    ccg_solve_observed(case, params, backend, &mut ())
}

pub fn ccg_solve_observed(
    case: &GridCase,
    params: &CcgParams,
    backend: &mut dyn Backend,
    observer: &mut dyn CcgObserver,
) -> Result<CcgReport> {
    params.check()?;
    let mut scenarios = vec![Scenario::nominal(case)];
    let mut iterations = Vec::new();
    let mut lb = 0.0f64;
    let mut ub = f64::INFINITY;
    let mut best = None;
    let mut status = CcgStatus::IterationLimit;
    for iter in 1..=params.max_iterations {
        let at = |e: Error| e.context(alloc::format!("iteration {iter}"));
        let ms = solve_master(case, &scenarios, &params.bigm, backend).map_err(at)?;
        lb = lb.max(ms.xi_mw);
        let hints: Vec<_> = scenarios.iter().map(|s| (s.attack.clone(), s.realization.clone())).collect();
        let sp = solve_subproblem_hinted(case, &ms.defense, &params.bigm, &hints, backend).map_err(at)?;
        if sp.eta_mw < ub {
            ub = sp.eta_mw;
            best = Some((ms.defense.clone(), sp.attack.clone(), sp.realization.clone()));
        }
        let g = gap(ms.xi_mw, ub, params).map_err(at)?;
        let scenario = Scenario::new(case, sp.attack, sp.realization).map_err(at)?;
        let mut record = IterationRecord {
            iter,
            lower_bound_mw: ms.xi_mw,
            upper_bound_mw: ub,
            eta_mw: sp.eta_mw,
            defense: ms.defense,
            scenario_signature: scenario.signature(case),
            scenario_added: false,
        };
        if g.converged {
            status = CcgStatus::Converged;
        } else if add_scenario(&mut scenarios, scenario).is_err() {
            status = CcgStatus::Stalled;
        } else {
            record.scenario_added = true;
        }
        observer.on_iteration(&record);
        iterations.push(record);
        if status != CcgStatus::IterationLimit {
            break;
        }
    }
    let (final_defense, worst_attack, worst_realization) = best.expect("at least one iteration ran");
    Ok(CcgReport {
        iterations,
        final_defense,
        final_loss_mw: ub,
        lower_bound_mw: lb,
        worst_attack,
        worst_realization,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tests::{single_bus, three_bus};
    use crate::lp::PureBackend;
    use crate::testutil::arb_case;

    fn run(case: &GridCase) -> CcgReport {
        ccg_solve(case, &CcgParams::default(), &mut PureBackend::default()).unwrap()
    }

    #[test]
    fn gap_examples() {
        let p = CcgParams::default();
        assert!(gap(0.0, 0.0, &p).unwrap().converged);
        assert!(gap(399.0, 399.0, &p).unwrap().converged);
        let g = gap(210.0, 399.0, &p).unwrap();
        assert!(!g.converged);
        assert!((g.value - 189.0).abs() < 1e-12);
        assert!(matches!(gap(400.0, 399.0, &p), Err(Error::BoundCrossing { .. })));
        assert!(gap(399.00005, 399.0, &p).is_ok());
    }

    #[test]
    fn frozen_adversary_converges_at_once() {
        let c = three_bus(1.0, 0.0, 0.0, 0.0);
        let r = run(&c);
        assert_eq!(r.status, CcgStatus::Converged);
        assert_eq!(r.iterations.len(), 1);
        assert!(r.final_loss_mw.abs() < 1e-9);
    }

    #[test]
    fn single_bus_values() {
        let r = run(&single_bus(0.0, 1.0, 1.0));
        assert!((r.final_loss_mw - 110.0).abs() < 1e-6);
        let r = run(&single_bus(1.0, 1.0, 1.0));
        assert!((r.final_loss_mw - 10.0).abs() < 1e-6);
        assert!(r.final_defense.gen_defend[0]);
    }

    #[test]
    fn observer_sees_every_iteration() {
        let c = three_bus(1.0, 1.0, 1.0, 1.0);
        let mut seen = Vec::new();
        let mut obs = |rec: &IterationRecord| seen.push(rec.iter);
        let r = ccg_solve_observed(&c, &CcgParams::default(), &mut PureBackend::default(), &mut obs).unwrap();
        assert_eq!(seen, (1..=r.iterations.len()).collect::<Vec<_>>());
    }

    #[test]
    fn invalid_params() {
        let c = single_bus(0.0, 0.0, 0.0);
        let p = CcgParams {
            max_iterations: 0,
            ..CcgParams::default()
        };
        assert!(ccg_solve(&c, &p, &mut PureBackend::default()).is_err());
    }

    #[test]
    fn iteration_limit_is_reported() {
        let c = three_bus(1.0, 1.0, 1.0, 1.0);
        let full = run(&c);
        if full.iterations.len() > 1 {
            let p = CcgParams {
                max_iterations: 1,
                ..CcgParams::default()
            };
            let r = ccg_solve(&c, &p, &mut PureBackend::default()).unwrap();
            assert_eq!(r.status, CcgStatus::IterationLimit);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn bounds_behave(case in arb_case()) {
                let r = run(&case);
                prop_assert_eq!(r.status, CcgStatus::Converged);
                let last = r.iterations.last().unwrap();
                prop_assert!(last.upper_bound_mw - last.lower_bound_mw <= 1e-4);
                for pair in r.iterations.windows(2) {
                    prop_assert!(pair[1].lower_bound_mw >= pair[0].lower_bound_mw - 1e-7);
                    prop_assert!(pair[1].upper_bound_mw <= pair[0].upper_bound_mw);
                }
            }
        }
    }
}
