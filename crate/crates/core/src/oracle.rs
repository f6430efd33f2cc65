//! Exhaustive min-max-min for small instances.
//!
//! Only [`solve_dispatch_state`] is used: no duality, no big-M. Dispatch
//! values depend on the defense and attack only through the set of
//! destroyed elements, so each distinct set is evaluated once against every
//! extreme realization and shared across defenses.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dispatch::{solve_dispatch_state, AttackPlan, DefensePlan, ServiceState};
use crate::error::{Error, Result};
use crate::grid::GridCase;
use crate::lp::Backend;
use crate::uncertainty::{binomial, enumerate_extreme_realizations, extreme_realization_count, UncertaintyRealization};

pub const DEFAULT_DEFENSE_CAP: u128 = 100_000;
pub const DEFAULT_LEAF_CAP: u128 = 100_000;

/// Interior samples may exceed the extreme maximum by this much (MW)
/// before they count as a counterexample.
const EXTREME_TOL_MW: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleCaps {
    pub defenses: u128,
    /// Attacks times realizations per defense.
    pub leaves: u128,
}

impl Default for OracleCaps {
    fn default() -> Self {
        Self {
            defenses: DEFAULT_DEFENSE_CAP,
            leaves: DEFAULT_LEAF_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSize {
    pub defenses: usize,
    pub attacks: usize,
    pub realizations: usize,
    /// Distinct sets of destroyed elements actually evaluated.
    pub service_states: usize,
    pub dispatch_solves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseEntry {
    pub defense: DefensePlan,
    pub worst_case_loss_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_defense: DefensePlan,
    pub worst_case_loss_mw: f64,
    /// A worst attack and realization against `best_defense`.
    pub worst_attack: AttackPlan,
    pub worst_realization: UncertaintyRealization,
    /// Every enumerated defense with its exact worst-case loss, in
    /// enumeration order.
    pub per_defense_table: Vec<DefenseEntry>,
    pub instance_size: InstanceSize,
}

/// Number of subsets whose cost fits the budget. Exact for uniform costs;
/// otherwise counting stops, returning `None`, once it passes `cap`.
fn count_subsets(costs: &[f64], budget: f64, cap: u128) -> Option<u128> {
    if let Some(&c) = costs.first() {
        if c > 0.0 && costs.iter().all(|&x| x == c) {
            let k = libm::floor(budget / c + 1e-9).max(0.0) as usize;
            let n: u128 = (0..=k.min(costs.len())).map(|a| binomial(costs.len(), a)).sum();
            return Some(n);
        }
    }
    let mut count = 0u128;
    let mut stack = alloc::vec![(0usize, 0.0f64)];
    while let Some((next, spent)) = stack.pop() {
        count += 1;
        if count > cap {
            return None;
        }
        for e in next..costs.len() {
            if spent + costs[e] <= budget + 1e-9 {
                stack.push((e + 1, spent + costs[e]));
            }
        }
    }
    Some(count)
}

/// Subsets of element positions within budget, ordered by size and then
/// lexicographically.
fn subsets_within(costs: &[f64], budget: f64, cap: u128, what: &'static str) -> Result<Vec<Vec<usize>>> {
    match count_subsets(costs, budget, cap) {
        Some(n) if n <= cap => {}
        // a non-uniform count aborted just past the cap
        n => return Err(Error::SizeCap { what, count: n.unwrap_or(cap + 1), cap }),
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut stack: Vec<(Vec<usize>, f64)> = alloc::vec![(Vec::new(), 0.0)];
    while let Some((set, spent)) = stack.pop() {
        let start = set.last().map_or(0, |&e| e + 1);
        for e in (start..costs.len()).rev() {
            if spent + costs[e] <= budget + 1e-9 {
                let mut next = set.clone();
                next.push(e);
                stack.push((next, spent + costs[e]));
            }
        }
        out.push(set);
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(out)
}

fn defense_costs(case: &GridCase) -> Vec<f64> {
    case.branches
        .iter()
        .map(|b| b.defense_cost)
        .chain(case.generators.iter().map(|g| g.defense_cost))
        .collect()
}

fn attack_costs(case: &GridCase) -> Vec<f64> {
    case.branches
        .iter()
        .map(|b| b.attack_cost)
        .chain(case.generators.iter().map(|g| g.attack_cost))
        .collect()
}

/// Every budget-feasible defense, smallest first.
pub fn enumerate_defenses(case: &GridCase, cap: u128) -> Result<Vec<DefensePlan>> {
    Ok(subsets_within(&defense_costs(case), case.budgets.defense_budget, cap, "defenses")?
        .iter()
        .map(|s| DefensePlan::from_elements(case, s))
        .collect())
}

/// Every budget-feasible attack, smallest first.
pub fn enumerate_attacks(case: &GridCase, cap: u128) -> Result<Vec<AttackPlan>> {
    Ok(subsets_within(&attack_costs(case), case.budgets.attack_budget, cap, "attacks")?
        .iter()
        .map(|s| AttackPlan::from_elements(case, s))
        .collect())
}

/// The enumeration behind [`oracle_solve`], split out so the distinct
/// service states can be evaluated in any order (or in parallel).
#[derive(Debug, Clone)]
pub struct OraclePlan {
    pub defenses: Vec<DefensePlan>,
    pub attacks: Vec<AttackPlan>,
    pub realizations: Vec<UncertaintyRealization>,
    /// Distinct service states to evaluate.
    pub states: Vec<ServiceState>,
    /// `state_of[d][a]`: index into `states` for defense `d` under attack `a`.
    pub state_of: Vec<Vec<usize>>,
}

impl OraclePlan {
    pub fn new(case: &GridCase, caps: OracleCaps) -> Result<Self> {
        let defenses = enumerate_defenses(case, caps.defenses)?;
        let realization_count = extreme_realization_count(case);
        let attacks = enumerate_attacks(case, caps.leaves)?;
        let leaves = (attacks.len() as u128).saturating_mul(realization_count);
        if leaves > caps.leaves {
            return Err(Error::SizeCap {
                what: "leaves per defense",
                count: leaves,
                cap: caps.leaves,
            });
        }
        let realizations: Vec<_> = enumerate_extreme_realizations(case, caps.leaves)?.collect();
        let mut index: BTreeMap<(Vec<bool>, Vec<bool>), usize> = BTreeMap::new();
        let mut states = Vec::new();
        let state_of = defenses
            .iter()
            .map(|d| {
                attacks
                    .iter()
                    .map(|a| {
                        let s = ServiceState::new(d, a);
                        let key = (s.branch_in_service.clone(), s.gen_in_service.clone());
                        *index.entry(key).or_insert_with(|| {
                            states.push(s);
                            states.len() - 1
                        })
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            defenses,
            attacks,
            realizations,
            states,
            state_of,
        })
    }

    /// Worst shed over all realizations for one service state, with the
    /// index of the first realization attaining it.
    pub fn evaluate_state(
        &self,
        case: &GridCase,
        state: &ServiceState,
        backend: &mut dyn Backend,
    ) -> Result<(f64, usize)> {
        let mut best = (f64::NEG_INFINITY, 0);
        for (r, real) in self.realizations.iter().enumerate() {
            let loads = real.realized_loads_mw(case)?;
            let wind = real.realized_wind_mw(case)?;
            let shed = solve_dispatch_state(case, state, &loads, &wind, backend)?.total_shed_mw;
            if shed > best.0 {
                best = (shed, r);
            }
        }
        Ok(best)
    }

    /// Combines per-state values (in `states` order) into the result.
    pub fn assemble(self, values: &[(f64, usize)]) -> OracleResult {
        let mut table = Vec::with_capacity(self.defenses.len());
        let mut best: Option<(usize, f64, usize, usize)> = None;
        for (d, row) in self.state_of.iter().enumerate() {
            let (mut worst, mut arg) = (f64::NEG_INFINITY, (0, 0));
            for (a, &s) in row.iter().enumerate() {
                if values[s].0 > worst {
                    worst = values[s].0;
                    arg = (a, values[s].1);
                }
            }
            if best.map_or(true, |b| worst < b.1) {
                best = Some((d, worst, arg.0, arg.1));
            }
            table.push(worst);
        }
        let (d, loss, a, r) = best.expect("the empty defense is always enumerated");
        let instance_size = InstanceSize {
            defenses: self.defenses.len(),
            attacks: self.attacks.len(),
            realizations: self.realizations.len(),
            service_states: self.states.len(),
            dispatch_solves: self.states.len() * self.realizations.len(),
        };
        OracleResult {
            best_defense: self.defenses[d].clone(),
            worst_case_loss_mw: loss,
            worst_attack: self.attacks[a].clone(),
            worst_realization: self.realizations[r].clone(),
            per_defense_table: self
                .defenses
                .into_iter()
                .zip(table)
                .map(|(defense, worst_case_loss_mw)| DefenseEntry {
                    defense,
                    worst_case_loss_mw,
                })
                .collect(),
            instance_size,
        }
    }
}

/// Exact trilevel optimum by enumeration.
pub fn oracle_solve(case: &GridCase, caps: OracleCaps, backend: &mut dyn Backend) -> Result<OracleResult> {
    let plan = OraclePlan::new(case, caps)?;
    let values = plan
        .states
        .iter()
        .map(|s| plan.evaluate_state(case, s, backend))
        .collect::<Result<Vec<_>>>()?;
    Ok(plan.assemble(&values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub attack: AttackPlan,
    pub realization: UncertaintyRealization,
    pub interior_mw: f64,
    pub extreme_max_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremePointReport {
    pub samples: usize,
    pub counterexamples: Vec<Counterexample>,
}

/// A random point of the uncertainty sets with fractional factors.
pub fn random_interior_realization<R: Rng + ?Sized>(case: &GridCase, rng: &mut R) -> UncertaintyRealization {
    fn side<R: Rng + ?Sized>(rng: &mut R, n: usize, budget: f64) -> (Vec<f64>, Vec<f64>) {
        let mut up = Vec::with_capacity(n);
        let mut down = Vec::with_capacity(n);
        for _ in 0..n {
            let total: f64 = rng.gen_range(0.0..1.0);
            let share: f64 = rng.gen_range(0.0..1.0);
            up.push(total * share);
            down.push(total * (1.0 - share));
        }
        let sum: f64 = up.iter().chain(&down).sum();
        if sum > budget && sum > 0.0 {
            let k = budget / sum;
            up.iter_mut().chain(down.iter_mut()).for_each(|z| *z *= k);
        }
        (up, down)
    }
    let (load_z_up, load_z_down) = side(rng, case.loads.len(), case.budgets.load_uncertainty_budget);
    let (wind_z_up, wind_z_down) = side(rng, case.wind_farms.len(), case.budgets.wind_uncertainty_budget);
    UncertaintyRealization {
        load_z_up,
        load_z_down,
        wind_z_up,
        wind_z_down,
    }
}

/// Checks that random interior realizations never shed more than the worst
/// extreme realization under the same (random, budget-feasible) attack.
pub fn validate_extreme_points<R: Rng + ?Sized>(
    case: &GridCase,
    defense: &DefensePlan,
    samples: usize,
    rng: &mut R,
    backend: &mut dyn Backend,
) -> Result<ExtremePointReport> {
    defense.check(case)?;
    let attacks = enumerate_attacks(case, DEFAULT_LEAF_CAP)?;
    let plan_realizations: Vec<_> = enumerate_extreme_realizations(case, DEFAULT_LEAF_CAP)?.collect();
    let mut extreme_max: BTreeMap<usize, f64> = BTreeMap::new();
    let mut counterexamples = Vec::new();
    for _ in 0..samples {
        let a = rng.gen_range(0..attacks.len());
        let state = ServiceState::new(defense, &attacks[a]);
        let max = match extreme_max.get(&a) {
            Some(&m) => m,
            None => {
                let mut m = f64::NEG_INFINITY;
                for r in &plan_realizations {
                    let loads = r.realized_loads_mw(case)?;
                    let wind = r.realized_wind_mw(case)?;
                    m = m.max(solve_dispatch_state(case, &state, &loads, &wind, backend)?.total_shed_mw);
                }
                extreme_max.insert(a, m);
                m
            }
        };
        let r = random_interior_realization(case, rng);
        let loads = r.realized_loads_mw(case)?;
        let wind = r.realized_wind_mw(case)?;
        let interior = solve_dispatch_state(case, &state, &loads, &wind, backend)?.total_shed_mw;
        if interior > max + EXTREME_TOL_MW {
            counterexamples.push(Counterexample {
                attack: attacks[a].clone(),
                realization: r,
                interior_mw: interior,
                extreme_max_mw: max,
            });
        }
    }
    Ok(ExtremePointReport {
        samples,
        counterexamples,
    })
}
