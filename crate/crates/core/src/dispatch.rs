//! The operator's problem: DC re-dispatch that minimizes total load shed
//! for a fixed defense, attack, and uncertainty realization.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridCase;
use crate::lp::{Backend, LinearModel, Name, ObjSense, RowSense, VarId};
use crate::uncertainty::{check_budget, UncertaintyRealization};

const BUDGET_TOL: f64 = 1e-9;

/// Protected elements (`true` = defended).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DefensePlan {
    pub branch_defend: Vec<bool>,
    pub gen_defend: Vec<bool>,
}

/// Attack decisions in "intact" form: `false` means the element is attacked.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttackPlan {
    pub branch_intact: Vec<bool>,
    pub gen_intact: Vec<bool>,
}

fn ids_where<T>(items: &[T], flags: &[bool], id: impl Fn(&T) -> u32, want: bool) -> Vec<u32> {
    let mut ids: Vec<u32> = items
        .iter()
        .zip(flags)
        .filter(|(_, &f)| f == want)
        .map(|(x, _)| id(x))
        .collect();
    ids.sort_unstable();
    ids
}

fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}

impl DefensePlan {
    pub fn none(case: &GridCase) -> Self {
        Self {
            branch_defend: vec![false; case.branches.len()],
            gen_defend: vec![false; case.generators.len()],
        }
    }

    /// Builds a plan from positional element indices (branches first, then
    /// generators).
    pub fn from_elements(case: &GridCase, elements: &[usize]) -> Self {
        let mut p = Self::none(case);
        let nl = case.branches.len();
        for &e in elements {
            if e < nl {
                p.branch_defend[e] = true;
            } else {
                p.gen_defend[e - nl] = true;
            }
        }
        p
    }

    pub fn cost(&self, case: &GridCase) -> f64 {
        let b: f64 = case
            .branches
            .iter()
            .zip(&self.branch_defend)
            .filter(|(_, &w)| w)
            .map(|(b, _)| b.defense_cost)
            .sum();
        let g: f64 = case
            .generators
            .iter()
            .zip(&self.gen_defend)
            .filter(|(_, &w)| w)
            .map(|(g, _)| g.defense_cost)
            .sum();
        b + g
    }

    pub fn check(&self, case: &GridCase) -> Result<()> {
        check_len("branch_defend", self.branch_defend.len(), case.branches.len())?;
        check_len("gen_defend", self.gen_defend.len(), case.generators.len())?;
        let cost = self.cost(case);
        if cost > case.budgets.defense_budget + BUDGET_TOL {
            return Err(Error::OverBudget(format!(
                "defense costs {cost}, budget is {}",
                case.budgets.defense_budget
            )));
        }
        Ok(())
    }

    pub fn defended_branch_ids(&self, case: &GridCase) -> Vec<u32> {
        ids_where(&case.branches, &self.branch_defend, |b| b.id, true)
    }

    pub fn defended_gen_ids(&self, case: &GridCase) -> Vec<u32> {
        ids_where(&case.generators, &self.gen_defend, |g| g.id, true)
    }

    pub fn is_empty(&self) -> bool {
        !self.branch_defend.iter().chain(&self.gen_defend).any(|&w| w)
    }
}

impl AttackPlan {
    pub fn no_attack(case: &GridCase) -> Self {
        Self {
            branch_intact: vec![true; case.branches.len()],
            gen_intact: vec![true; case.generators.len()],
        }
    }

    /// Plan attacking the given positional elements (branches first).
    pub fn from_elements(case: &GridCase, elements: &[usize]) -> Self {
        let mut p = Self::no_attack(case);
        let nl = case.branches.len();
        for &e in elements {
            if e < nl {
                p.branch_intact[e] = false;
            } else {
                p.gen_intact[e - nl] = false;
            }
        }
        p
    }

    pub fn cost(&self, case: &GridCase) -> f64 {
        let b: f64 = case
            .branches
            .iter()
            .zip(&self.branch_intact)
            .filter(|(_, &v)| !v)
            .map(|(b, _)| b.attack_cost)
            .sum();
        let g: f64 = case
            .generators
            .iter()
            .zip(&self.gen_intact)
            .filter(|(_, &v)| !v)
            .map(|(g, _)| g.attack_cost)
            .sum();
        b + g
    }

    pub fn check(&self, case: &GridCase) -> Result<()> {
        check_len("branch_intact", self.branch_intact.len(), case.branches.len())?;
        check_len("gen_intact", self.gen_intact.len(), case.generators.len())?;
        let cost = self.cost(case);
        if cost > case.budgets.attack_budget + BUDGET_TOL {
            return Err(Error::OverBudget(format!(
                "attack costs {cost}, budget is {}",
                case.budgets.attack_budget
            )));
        }
        Ok(())
    }

    pub fn attacked_branch_ids(&self, case: &GridCase) -> Vec<u32> {
        ids_where(&case.branches, &self.branch_intact, |b| b.id, false)
    }

    pub fn attacked_gen_ids(&self, case: &GridCase) -> Vec<u32> {
        ids_where(&case.generators, &self.gen_intact, |g| g.id, false)
    }

    pub fn is_empty(&self) -> bool {
        self.branch_intact.iter().chain(&self.gen_intact).all(|&v| v)
    }
}

/// In-service indicator `w + v - w*v`: an element is lost only when it is
/// attacked (`v = 0`) and not defended (`w = 0`).
pub fn survival(w: u8, v: u8) -> u8 {
    debug_assert!(w <= 1 && v <= 1);
    w + v - w * v
}

/// Which elements remain in service after defense and attack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceState {
    pub branch_in_service: Vec<bool>,
    pub gen_in_service: Vec<bool>,
}

impl ServiceState {
    pub fn new(defense: &DefensePlan, attack: &AttackPlan) -> Self {
        let s = |w: &[bool], v: &[bool]| -> Vec<bool> {
            w.iter()
                .zip(v)
                .map(|(&w, &v)| survival(u8::from(w), u8::from(v)) == 1)
                .collect()
        };
        Self {
            branch_in_service: s(&defense.branch_defend, &attack.branch_intact),
            gen_in_service: s(&defense.gen_defend, &attack.gen_intact),
        }
    }

    pub fn all_in_service(case: &GridCase) -> Self {
        Self {
            branch_in_service: vec![true; case.branches.len()],
            gen_in_service: vec![true; case.generators.len()],
        }
    }
}

/// Dual values of the dispatch LP. Bound duals follow the reduced-cost
/// convention: upper-bound duals are `<= 0`, lower-bound duals `>= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchDuals {
    /// Bus balance duals (one per bus).
    pub balance: Vec<f64>,
    /// Flow-definition duals; zero for out-of-service branches.
    pub flow_definition: Vec<f64>,
    pub flow_lower: Vec<f64>,
    pub flow_upper: Vec<f64>,
    pub gen_upper: Vec<f64>,
    pub wind_upper: Vec<f64>,
    pub shed_upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchResult {
    pub gen_output_mw: Vec<f64>,
    pub wind_output_mw: Vec<f64>,
    pub flows_mw: Vec<f64>,
    pub angles_rad: Vec<f64>,
    pub shed_mw: Vec<f64>,
    pub total_shed_mw: f64,
    pub duals: DispatchDuals,
}

impl DispatchResult {
    /// Dual objective in MW, assembled only from the reported duals and the
    /// case data: balance duals times bus demand plus every bound dual
    /// times its bound.
    pub fn dual_objective_mw(
        &self,
        case: &GridCase,
        state: &ServiceState,
        loads_mw: &[f64],
        wind_mw: &[f64],
    ) -> f64 {
        let topo = case.topology();
        let d = &self.duals;
        let mut total = 0.0;
        for (i, &n) in topo.load_bus.iter().enumerate() {
            total += (d.balance[n] + d.shed_upper[i]) * loads_mw[i];
        }
        for (j, g) in case.generators.iter().enumerate() {
            if state.gen_in_service[j] {
                total += d.gen_upper[j] * g.p_max;
            }
        }
        for (k, &w) in wind_mw.iter().enumerate() {
            total += d.wind_upper[k] * w;
        }
        for (l, b) in case.branches.iter().enumerate() {
            if state.branch_in_service[l] {
                total += (d.flow_upper[l] - d.flow_lower[l]) * b.flow_limit;
            }
        }
        total
    }
}

/// Variable and row handles of a built dispatch LP.
#[derive(Debug, Clone)]
pub struct DispatchModel {
    pub model: LinearModel,
    pub angle: Vec<VarId>,
    pub flow: Vec<VarId>,
    pub gen: Vec<VarId>,
    pub wind: Vec<VarId>,
    pub shed: Vec<VarId>,
    pub flow_row: Vec<Option<usize>>,
    pub balance_row: Vec<usize>,
}

/// Builds the per-unit load-shedding LP.
///
/// Out-of-service branches get no flow-definition row and a flow fixed at
/// zero; out-of-service generators are fixed at zero output. The lowest
/// numbered bus is the angle reference.
pub fn build_dispatch_model(case: &GridCase, state: &ServiceState, loads_mw: &[f64], wind_mw: &[f64]) -> DispatchModel {
    let topo = case.topology();
    let mut m = LinearModel::new(ObjSense::Minimize);
    let angle: Vec<VarId> = case
        .buses
        .iter()
        .enumerate()
        .map(|(n, b)| {
            if n == topo.reference_bus {
                m.continuous(Name::new("delta", b.id), 0.0, 0.0)
            } else {
                m.continuous(Name::new("delta", b.id), f64::NEG_INFINITY, f64::INFINITY)
            }
        })
        .collect();
    let flow: Vec<VarId> = case
        .branches
        .iter()
        .zip(&state.branch_in_service)
        .map(|(b, &on)| {
            let cap = if on { case.to_pu(b.flow_limit) } else { 0.0 };
            m.continuous(Name::new("pf", b.id), -cap, cap)
        })
        .collect();
    let gen: Vec<VarId> = case
        .generators
        .iter()
        .zip(&state.gen_in_service)
        .map(|(g, &on)| {
            let cap = if on { case.to_pu(g.p_max) } else { 0.0 };
            m.continuous(Name::new("pg", g.id), 0.0, cap)
        })
        .collect();
    let wind: Vec<VarId> = case
        .wind_farms
        .iter()
        .zip(wind_mw)
        .map(|(w, &avail)| m.continuous(Name::new("pw", w.id), 0.0, case.to_pu(avail)))
        .collect();
    let shed: Vec<VarId> = case
        .loads
        .iter()
        .zip(loads_mw)
        .map(|(l, &demand)| m.continuous(Name::new("shed", l.id), 0.0, case.to_pu(demand)))
        .collect();
    for &s in &shed {
        m.add_objective(s, 1.0);
    }

    let flow_row = case
        .branches
        .iter()
        .enumerate()
        .map(|(l, b)| {
            state.branch_in_service[l].then(|| {
                let y = 1.0 / b.reactance_x;
                m.row(
                    Name::new("flow_def", b.id),
                    [(flow[l], 1.0), (angle[topo.from[l]], -y), (angle[topo.to[l]], y)],
                    RowSense::Eq,
                    0.0,
                )
            })
        })
        .collect();
    let balance_row = case
        .buses
        .iter()
        .enumerate()
        .map(|(n, b)| {
            let mut terms: Vec<(VarId, f64)> = Vec::new();
            terms.extend(topo.gens_at[n].iter().map(|&j| (gen[j], 1.0)));
            terms.extend(topo.incident(n).map(|(l, a)| (flow[l], -a)));
            terms.extend(topo.farms_at[n].iter().map(|&k| (wind[k], 1.0)));
            terms.extend(topo.loads_at[n].iter().map(|&i| (shed[i], 1.0)));
            let demand: f64 = topo.loads_at[n].iter().map(|&i| case.to_pu(loads_mw[i])).sum();
            m.row(Name::new("balance", b.id), terms, RowSense::Eq, demand)
        })
        .collect();
    DispatchModel {
        model: m,
        angle,
        flow,
        gen,
        wind,
        shed,
        flow_row,
        balance_row,
    }
}

/// Minimum total load shed for a fixed defense, attack, and realization.
pub fn solve_dispatch(
    case: &GridCase,
    defense: &DefensePlan,
    attack: &AttackPlan,
    realization: &UncertaintyRealization,
    backend: &mut dyn Backend,
) -> Result<DispatchResult> {
    defense.check(case)?;
    attack.check(case)?;
    realization.check_dims(case)?;
    let violations = check_budget(realization, &case.budgets)?;
    if !violations.is_empty() {
        return Err(Error::Domain(format!("realization violates its uncertainty set: {violations:?}")));
    }
    let loads = realization.realized_loads_mw(case)?;
    let wind = realization.realized_wind_mw(case)?;
    solve_dispatch_state(case, &ServiceState::new(defense, attack), &loads, &wind, backend)
}

/// Same as [`solve_dispatch`] but on an explicit service state and realized
/// MW values, without budget checks.
pub fn solve_dispatch_state(
    case: &GridCase,
    state: &ServiceState,
    loads_mw: &[f64],
    wind_mw: &[f64],
    backend: &mut dyn Backend,
) -> Result<DispatchResult> {
    let dm = build_dispatch_model(case, state, loads_mw, wind_mw);
    let out = backend
        .solve_lp(&dm.model)?
        .require_optimal()
        .map_err(|e| Error::from(e).context(String::from("dispatch LP")))?;
    #[cfg(debug_assertions)]
    crate::lp::check_strong_duality(&dm.model, &out, 1e-6)?;

    let mw = |v: VarId| case.to_mw(out.value(v));
    let y = out.row_duals.as_deref().unwrap_or(&[]);
    let r = out.reduced_costs.as_deref().unwrap_or(&[]);
    let dual = |row: usize| y.get(row).copied().unwrap_or(0.0);
    let rc = |v: VarId| r.get(v.0).copied().unwrap_or(0.0);

    let shed_mw: Vec<f64> = dm.shed.iter().map(|&v| mw(v)).collect();
    let total_shed_mw = shed_mw.iter().sum();
    let duals = DispatchDuals {
        balance: dm.balance_row.iter().map(|&row| dual(row)).collect(),
        flow_definition: dm.flow_row.iter().map(|row| row.map_or(0.0, dual)).collect(),
        flow_lower: dm
            .flow
            .iter()
            .zip(&state.branch_in_service)
            .map(|(&v, &on)| if on { rc(v).max(0.0) } else { 0.0 })
            .collect(),
        flow_upper: dm
            .flow
            .iter()
            .zip(&state.branch_in_service)
            .map(|(&v, &on)| if on { rc(v).min(0.0) } else { 0.0 })
            .collect(),
        gen_upper: dm
            .gen
            .iter()
            .zip(&state.gen_in_service)
            .map(|(&v, &on)| if on { rc(v).min(0.0) } else { 0.0 })
            .collect(),
        wind_upper: dm.wind.iter().map(|&v| rc(v).min(0.0)).collect(),
        shed_upper: dm.shed.iter().map(|&v| rc(v).min(0.0)).collect(),
    };
    Ok(DispatchResult {
        gen_output_mw: dm.gen.iter().map(|&v| mw(v)).collect(),
        wind_output_mw: dm.wind.iter().map(|&v| mw(v)).collect(),
        flows_mw: dm.flow.iter().map(|&v| mw(v)).collect(),
        angles_rad: dm.angle.iter().map(|&v| out.value(v)).collect(),
        shed_mw,
        total_shed_mw,
        duals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tests::{single_bus, three_bus};
    use crate::lp::PureBackend;
    use crate::testutil::{arb_case, some_attack, some_realization};

    fn solve(case: &GridCase, defense: &DefensePlan, attack: &AttackPlan, r: &UncertaintyRealization) -> DispatchResult {
        solve_dispatch(case, defense, attack, r, &mut PureBackend::default()).unwrap()
    }

    #[test]
    fn survival_truth_table() {
        assert_eq!(survival(0, 0), 0);
        assert_eq!(survival(1, 0), 1);
        assert_eq!(survival(0, 1), 1);
        assert_eq!(survival(1, 1), 1);
    }

    #[test]
    fn single_bus_adequate() {
        let c = single_bus(0.0, 1.0, 0.0);
        let r = UncertaintyRealization::nominal_for(&c);
        let res = solve(&c, &DefensePlan::none(&c), &AttackPlan::no_attack(&c), &r);
        assert!(res.total_shed_mw.abs() < 1e-9);
    }

    #[test]
    fn single_bus_generator_destroyed() {
        let c = single_bus(0.0, 1.0, 0.0);
        let r = UncertaintyRealization::nominal_for(&c);
        let attack = AttackPlan::from_elements(&c, &[0]);
        let res = solve(&c, &DefensePlan::none(&c), &attack, &r);
        assert!((res.total_shed_mw - 80.0).abs() < 1e-9);
        assert_eq!(res.gen_output_mw[0], 0.0);
    }

    /// Branch 1-2 destroyed, load up to 100 MW, wind down to 20 MW. What is
    /// left is the path 1 -> 3 -> 2: at most 50 MW crosses 1-3 and at most
    /// 50 MW crosses 3-2, so bus 2 receives at most 50 MW (30 from the
    /// generator plus the 20 MW of wind saturate 3-2). Shed = 100 - 50.
    #[test]
    fn three_bus_hand_solved() {
        let c = three_bus(0.0, 1.0, 1.0, 1.0);
        let mut r = UncertaintyRealization::nominal_for(&c);
        r.load_z_up[0] = 1.0;
        r.wind_z_down[0] = 1.0;
        let attack = AttackPlan::from_elements(&c, &[0]);
        let res = solve(&c, &DefensePlan::none(&c), &attack, &r);
        assert!((res.total_shed_mw - 50.0).abs() < 1e-7, "{}", res.total_shed_mw);
        assert_eq!(res.flows_mw[0], 0.0);
        let state = ServiceState::new(&DefensePlan::none(&c), &attack);
        let dual = res.dual_objective_mw(&c, &state, &[100.0], &[20.0]);
        assert!((dual - res.total_shed_mw).abs() < 1e-6);
    }

    #[test]
    fn three_bus_intact_loop_flow() {
        // nominal, no attack: 80 MW load served; check KVL on the loop
        let c = three_bus(0.0, 0.0, 0.0, 0.0);
        let r = UncertaintyRealization::nominal_for(&c);
        let res = solve(&c, &DefensePlan::none(&c), &AttackPlan::no_attack(&c), &r);
        assert!(res.total_shed_mw.abs() < 1e-9);
        for (l, b) in c.branches.iter().enumerate() {
            let topo = c.topology();
            let dtheta = res.angles_rad[topo.from[l]] - res.angles_rad[topo.to[l]];
            assert!((res.flows_mw[l] - c.to_mw(dtheta / b.reactance_x)).abs() < 1e-7);
        }
        assert_eq!(res.angles_rad[0], 0.0);
    }

    #[test]
    fn plan_budget_checks() {
        let c = three_bus(0.0, 1.0, 0.0, 0.0);
        let attack = AttackPlan::from_elements(&c, &[0, 1]);
        let r = UncertaintyRealization::nominal_for(&c);
        assert!(matches!(
            solve_dispatch(&c, &DefensePlan::none(&c), &attack, &r, &mut PureBackend::default()),
            Err(Error::OverBudget(_))
        ));
        let mut r = UncertaintyRealization::nominal_for(&c);
        r.load_z_up[0] = 1.0;
        assert!(matches!(
            solve_dispatch(&c, &DefensePlan::none(&c), &AttackPlan::no_attack(&c), &r, &mut PureBackend::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn one_bus_dual_instantiation() {
        // lambda + alpha <= 1 and lambda + gamma <= 0: with 10 MW short the
        // balance dual is 1 and the generator upper-bound dual is -1.
        let mut c = single_bus(0.0, 0.0, 0.0);
        c.loads[0].expected_mw = 110.0;
        c.loads[0].dev_down_mw = 0.0;
        let r = UncertaintyRealization::nominal_for(&c);
        let res = solve(&c, &DefensePlan::none(&c), &AttackPlan::no_attack(&c), &r);
        assert!((res.total_shed_mw - 10.0).abs() < 1e-9);
        assert!((res.duals.balance[0] - 1.0).abs() < 1e-9);
        assert!((res.duals.gen_upper[0] + 1.0).abs() < 1e-9);
        assert!(res.duals.balance[0] + res.duals.shed_upper[0] <= 1.0 + 1e-9);
    }

    /// Removing a branch can relieve a loop-flow bottleneck, so monotonicity
    /// in attack holds for generators but not for branches. Here the stiff
    /// 3-2 link pushes flow onto the 26 MW branch 3-1; cutting it serves more.
    #[test]
    fn branch_removal_can_reduce_shed() {
        use crate::grid::tests::{branch, budgets, bus, generator, load};
        let c = GridCase {
            base_mva: 100.0,
            buses: vec![bus(1), bus(2), bus(3)],
            branches: vec![
                branch(1, 3, 1, 0.33, 26.0),
                branch(2, 1, 2, 0.29, 65.0),
                branch(3, 2, 3, 0.32, 38.0),
                branch(4, 3, 2, 0.05, 59.0),
            ],
            generators: vec![generator(1, 1, 80.0)],
            wind_farms: vec![],
            loads: vec![load(1, 2, 98.0, 7.0, 7.0)],
            budgets: budgets(0.0, 1.0, 0.0, 0.0),
        };
        let r = UncertaintyRealization::nominal_for(&c);
        let d = DefensePlan::none(&c);
        let intact = solve(&c, &d, &AttackPlan::no_attack(&c), &r).total_shed_mw;
        let best_cut = (0..4)
            .map(|l| solve(&c, &d, &AttackPlan::from_elements(&c, &[l]), &r).total_shed_mw)
            .fold(f64::INFINITY, f64::min);
        assert!(best_cut < intact - 1.0, "intact {intact}, best single cut {best_cut}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn strong_duality_and_destroyed_elements(case in arb_case(), seed in any::<u64>()) {
                let attack = some_attack(&case, seed);
                let r = some_realization(&case, seed);
                let defense = DefensePlan::none(&case);
                let res = solve(&case, &defense, &attack, &r);
                let state = ServiceState::new(&defense, &attack);
                let loads = r.realized_loads_mw(&case).unwrap();
                let wind = r.realized_wind_mw(&case).unwrap();
                let dual = res.dual_objective_mw(&case, &state, &loads, &wind);
                prop_assert!((dual - res.total_shed_mw).abs() <= 1e-6 * case.base_mva);
                prop_assert!((res.total_shed_mw - res.shed_mw.iter().sum::<f64>()).abs() < 1e-12);
                for (l, &on) in state.branch_in_service.iter().enumerate() {
                    if !on { prop_assert_eq!(res.flows_mw[l], 0.0); }
                }
                for (j, &on) in state.gen_in_service.iter().enumerate() {
                    if !on { prop_assert_eq!(res.gen_output_mw[j], 0.0); }
                }
            }

            #[test]
            fn losing_a_generator_never_helps(case in arb_case(), seed in any::<u64>(), extra in any::<prop::sample::Index>()) {
                let attack = some_attack(&case, seed);
                let r = some_realization(&case, seed);
                let state = ServiceState::new(&DefensePlan::none(&case), &attack);
                let loads = r.realized_loads_mw(&case).unwrap();
                let wind = r.realized_wind_mw(&case).unwrap();
                let mut backend = PureBackend::default();
                let base = solve_dispatch_state(&case, &state, &loads, &wind, &mut backend).unwrap();
                let mut worse = state.clone();
                worse.gen_in_service[extra.index(case.generators.len())] = false;
                let more = solve_dispatch_state(&case, &worse, &loads, &wind, &mut backend).unwrap();
                prop_assert!(more.total_shed_mw >= base.total_shed_mw - 1e-7);
            }
        }
    }
}
