//! The defender's master problem over a finite scenario list.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::dispatch::{solve_dispatch, AttackPlan, DefensePlan};
use crate::error::{Error, Result};
use crate::grid::GridCase;
use crate::lp::{solve_milp_polished, Backend, LinearModel, Name, ObjSense, RowSense, SolveStats, VarId};
use crate::subproblem::BigMConfig;
use crate::uncertainty::{check_budget, UncertaintyRealization};
use crate::CHECK_TOL_MW;

/// One attacker/nature move, with realized loads and wind in MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub attack: AttackPlan,
    pub realization: UncertaintyRealization,
    pub realized_loads_mw: Vec<f64>,
    pub realized_wind_mw: Vec<f64>,
}

impl Scenario {
    pub fn new(case: &GridCase, attack: AttackPlan, realization: UncertaintyRealization) -> Result<Self> {
        attack.check(case)?;
        realization.check_dims(case)?;
        let violations = check_budget(&realization, &case.budgets)?;
        if !violations.is_empty() {
            return Err(Error::Domain(format!("scenario realization infeasible: {violations:?}")));
        }
        Ok(Self {
            realized_loads_mw: realization.realized_loads_mw(case)?,
            realized_wind_mw: realization.realized_wind_mw(case)?,
            attack,
            realization,
        })
    }

    /// No attack, every factor at zero.
    pub fn nominal(case: &GridCase) -> Self {
        Self {
            attack: AttackPlan::no_attack(case),
            realization: UncertaintyRealization::nominal_for(case),
            realized_loads_mw: case.loads.iter().map(|l| l.expected_mw).collect(),
            realized_wind_mw: case.wind_farms.iter().map(|w| w.expected_mw).collect(),
        }
    }

    pub fn same_move(&self, other: &Self) -> bool {
        self.attack == other.attack && self.realization == other.realization
    }

    /// Compact text key built from case ids, e.g. `f:3,7 g:11 d:+2,-5 w:-1`;
    /// `-` when nothing is attacked or deviated.
    pub fn signature(&self, case: &GridCase) -> String {
        let mut parts: Vec<String> = Vec::new();
        let list = |ids: &[u32]| ids.iter().map(|i| format!("{i}")).collect::<Vec<_>>().join(",");
        let f = self.attack.attacked_branch_ids(case);
        if !f.is_empty() {
            parts.push(format!("f:{}", list(&f)));
        }
        let g = self.attack.attacked_gen_ids(case);
        if !g.is_empty() {
            parts.push(format!("g:{}", list(&g)));
        }
        let signed = |up: &[f64], down: &[f64], ids: &mut dyn Iterator<Item = u32>| {
            let mut s = String::new();
            for ((&u, &d), id) in up.iter().zip(down).zip(ids) {
                let sign = if u > 0.5 {
                    '+'
                } else if d > 0.5 {
                    '-'
                } else {
                    continue;
                };
                if !s.is_empty() {
                    s.push(',');
                }
                let _ = write!(s, "{sign}{id}");
            }
            s
        };
        let r = &self.realization;
        let d = signed(&r.load_z_up, &r.load_z_down, &mut case.loads.iter().map(|l| l.id));
        if !d.is_empty() {
            parts.push(format!("d:{d}"));
        }
        let w = signed(&r.wind_z_up, &r.wind_z_down, &mut case.wind_farms.iter().map(|w| w.id));
        if !w.is_empty() {
            parts.push(format!("w:{w}"));
        }
        if parts.is_empty() {
            String::from("-")
        } else {
            parts.join(" ")
        }
    }
}

/// Appends `new`, refusing a scenario that is already present.
pub fn add_scenario(scenarios: &mut Vec<Scenario>, new: Scenario) -> Result<()> {
    if scenarios.iter().any(|s| s.same_move(&new)) {
        return Err(Error::DuplicateScenario);
    }
    scenarios.push(new);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterSolution {
    pub defense: DefensePlan,
    /// Master objective: the lower bound (MW).
    pub xi_mw: f64,
    /// Dispatch shed of every scenario re-solved at `defense` (MW).
    pub per_scenario_shed_mw: Vec<f64>,
    pub stats: SolveStats,
}

/// Handles of a built master MILP.
#[derive(Debug, Clone)]
pub struct MasterModel {
    pub model: LinearModel,
    pub w_branch: Vec<VarId>,
    pub w_gen: Vec<VarId>,
    pub xi: VarId,
    /// Shed variables per scenario.
    pub shed: Vec<Vec<VarId>>,
}

pub fn build_master(case: &GridCase, scenarios: &[Scenario], bigm: &BigMConfig) -> Result<MasterModel> {
    if scenarios.is_empty() {
        return Err(Error::EmptyScenarios);
    }
    bigm.check()?;
    let topo = case.topology();
    let theta = bigm.angle_bound_for(case);
    let mut m = LinearModel::new(ObjSense::Minimize);
    let w_branch: Vec<VarId> = case.branches.iter().map(|b| m.binary(Name::new("w_f", b.id))).collect();
    let w_gen: Vec<VarId> = case.generators.iter().map(|g| m.binary(Name::new("w_g", g.id))).collect();
    let xi = m.continuous(Name::scalar("xi"), 0.0, f64::INFINITY);
    m.add_objective(xi, 1.0);
    m.row(
        Name::scalar("defense_budget"),
        w_branch
            .iter()
            .zip(&case.branches)
            .map(|(&w, b)| (w, b.defense_cost))
            .chain(w_gen.iter().zip(&case.generators).map(|(&w, g)| (w, g.defense_cost))),
        RowSense::Le,
        case.budgets.defense_budget,
    );

    let mut shed_all = Vec::with_capacity(scenarios.len());
    for (s, sc) in scenarios.iter().enumerate() {
        sc.attack.check(case)?;
        let s = s as u32;
        let delta: Vec<VarId> = case
            .buses
            .iter()
            .map(|b| m.continuous(Name::in_scenario("delta", b.id, s), -theta, theta))
            .collect();
        let flow: Vec<VarId> = case
            .branches
            .iter()
            .map(|b| {
                let f = case.to_pu(b.flow_limit);
                m.continuous(Name::in_scenario("pf", b.id, s), -f, f)
            })
            .collect();
        let gen: Vec<VarId> = case
            .generators
            .iter()
            .map(|g| m.continuous(Name::in_scenario("pg", g.id, s), 0.0, case.to_pu(g.p_max)))
            .collect();
        let wind: Vec<VarId> = case
            .wind_farms
            .iter()
            .zip(&sc.realized_wind_mw)
            .map(|(w, &a)| m.continuous(Name::in_scenario("pw", w.id, s), 0.0, case.to_pu(a)))
            .collect();
        let shed: Vec<VarId> = case
            .loads
            .iter()
            .zip(&sc.realized_loads_mw)
            .map(|(l, &d)| m.continuous(Name::in_scenario("shed", l.id, s), 0.0, case.to_pu(d)))
            .collect();

        for (l, b) in case.branches.iter().enumerate() {
            let y = 1.0 / b.reactance_x;
            let (p, df, dt) = (flow[l], delta[topo.from[l]], delta[topo.to[l]]);
            let name = Name::in_scenario("flow_def", b.id, s);
            if sc.attack.branch_intact[l] {
                m.row(name, [(p, 1.0), (df, -y), (dt, y)], RowSense::Eq, 0.0);
            } else {
                // in service only if defended
                let f = case.to_pu(b.flow_limit);
                let big = y * 2.0 * theta + f;
                let w = w_branch[l];
                m.row(name, [(p, 1.0), (df, -y), (dt, y), (w, big)], RowSense::Le, big);
                m.row(name, [(p, 1.0), (df, -y), (dt, y), (w, -big)], RowSense::Ge, -big);
                let cap = Name::in_scenario("flow_cap", b.id, s);
                m.row(cap, [(p, 1.0), (w, -f)], RowSense::Le, 0.0);
                m.row(cap, [(p, 1.0), (w, f)], RowSense::Ge, 0.0);
            }
        }
        for (j, g) in case.generators.iter().enumerate() {
            if !sc.attack.gen_intact[j] {
                m.row(
                    Name::in_scenario("gen_cap", g.id, s),
                    [(gen[j], 1.0), (w_gen[j], -case.to_pu(g.p_max))],
                    RowSense::Le,
                    0.0,
                );
            }
        }
        for (n, b) in case.buses.iter().enumerate() {
            let mut terms: Vec<(VarId, f64)> = Vec::new();
            terms.extend(topo.gens_at[n].iter().map(|&j| (gen[j], 1.0)));
            terms.extend(topo.incident(n).map(|(l, a)| (flow[l], -a)));
            terms.extend(topo.farms_at[n].iter().map(|&k| (wind[k], 1.0)));
            terms.extend(topo.loads_at[n].iter().map(|&i| (shed[i], 1.0)));
            let demand: f64 = topo.loads_at[n]
                .iter()
                .map(|&i| case.to_pu(sc.realized_loads_mw[i]))
                .sum();
            m.row(Name::in_scenario("balance", b.id, s), terms, RowSense::Eq, demand);
        }
        m.row(
            Name::new("worst", s),
            core::iter::once((xi, 1.0)).chain(shed.iter().map(|&v| (v, -1.0))),
            RowSense::Ge,
            0.0,
        );
        shed_all.push(shed);
    }
    Ok(MasterModel {
        model: m,
        w_branch,
        w_gen,
        xi,
        shed: shed_all,
    })
}

/// Optimal defense against every listed scenario, with each scenario's shed
/// re-solved independently as a post-check.
pub fn solve_master(
    case: &GridCase,
    scenarios: &[Scenario],
    bigm: &BigMConfig,
    backend: &mut dyn Backend,
) -> Result<MasterSolution> {
    let mm = build_master(case, scenarios, bigm)?;
    mm.model.lint()?;
    let out = solve_milp_polished(backend, &mm.model).map_err(|e| Error::from(e).context("master MILP"))?;
    let defense = DefensePlan {
        branch_defend: mm.w_branch.iter().map(|&w| out.flag(w)).collect(),
        gen_defend: mm.w_gen.iter().map(|&w| out.flag(w)).collect(),
    };
    let xi_mw = case.to_mw(out.value(mm.xi));
    let mut per_scenario_shed_mw = Vec::with_capacity(scenarios.len());
    for (s, sc) in scenarios.iter().enumerate() {
        let d = solve_dispatch(case, &defense, &sc.attack, &sc.realization, backend)
            .map_err(|e| e.context(format!("master post-check, scenario {s}")))?;
        per_scenario_shed_mw.push(d.total_shed_mw);
    }
    let worst = per_scenario_shed_mw.iter().copied().fold(0.0, f64::max);
    if (worst - xi_mw).abs() > CHECK_TOL_MW {
        return Err(Error::PostCheck {
            what: "master",
            model_mw: xi_mw,
            dispatch_mw: worst,
        });
    }
    Ok(MasterSolution {
        defense,
        xi_mw,
        per_scenario_shed_mw,
        stats: out.stats,
    })
}
