//! The attacker and nature against a fixed defense.
//!
//! The operator's dispatch LP is replaced by its dual, turning the max-min
//! into one maximization over attack binaries `v`, uncertainty binaries `z`
//! and dual prices. Products of a binary with a dual variable are replaced
//! by auxiliary variables bounded by the usual four-row envelope.
//!
//! Dual variables (all per unit), for a dispatch with service indicators
//! `s` and realized demand `d` and wind `W`:
//!
//! ```text
//! max  sum_i (lambda_n(i) + alpha_i) d_i + sum_j gamma_j G_j + sum_k beta_k W_k
//!      + sum_l (theta_up_l - theta_lo_l) F_l
//! s.t. sum_l A_nl s_l b_l mu_l = 0                      for every bus n
//!      mu_l - (lambda_f(l) - lambda_t(l)) + theta_lo_l + theta_up_l = 0
//!      s_j lambda_n(j) + gamma_j <= 0
//!      lambda_n(k) + beta_k <= 0
//!      lambda_n(i) + alpha_i <= 1
//!      theta_lo >= 0;  theta_up, gamma, beta, alpha <= 0
//! ```

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dispatch::{solve_dispatch, solve_dispatch_state, AttackPlan, DefensePlan, DispatchDuals, ServiceState};
use crate::error::{Error, Result};
use crate::grid::GridCase;
use crate::lp::{
    fix_binaries, solve_milp_polished_from, Backend, LinearModel, Name, ObjSense, RowSense, SolveStats, SolveStatus, VarId,
};
use crate::uncertainty::UncertaintyRealization;
use crate::CHECK_TOL_MW;

/// Bounds used by the big-M envelopes of the subproblem and the master.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BigMConfig {
    /// Bound on every bus price `|lambda_n|`; bounds on the generator, wind
    /// and shed duals derive from it.
    pub dual_bound_m: f64,
    /// Requested bound on `|delta_n|` in the master. Raised automatically to
    /// a bound that is valid for the case (see [`BigMConfig::angle_bound_for`]).
    pub angle_bound_rad: f64,
    /// Replaces the derived bound on `|mu_l|`.
    pub flow_dual_m: Option<f64>,
    /// Replaces the derived bound on `lambda_n + alpha_i`.
    pub load_price_m: Option<f64>,
}

/// The shed cost coefficient bounds every bus price when no congestion
/// amplifies it.
const ANALYTIC_PRICE_BOUND: f64 = 1.0;
const SAFETY_FACTOR: f64 = 10.0;

impl Default for BigMConfig {
    fn default() -> Self {
        Self {
            dual_bound_m: ANALYTIC_PRICE_BOUND * SAFETY_FACTOR,
            angle_bound_rad: core::f64::consts::PI,
            flow_dual_m: None,
            load_price_m: None,
        }
    }
}

impl BigMConfig {
    /// All bounds multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            dual_bound_m: self.dual_bound_m * k,
            angle_bound_rad: self.angle_bound_rad * k,
            flow_dual_m: self.flow_dual_m.map(|m| m * k),
            load_price_m: self.load_price_m.map(|m| m * k),
        }
    }

    pub fn check(&self) -> Result<()> {
        let positive = |family: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("big-M bound {family} must be positive and finite, got {v}")))
            }
        };
        positive("dual_bound_m", self.dual_bound_m)?;
        positive("angle_bound_rad", self.angle_bound_rad)?;
        if self.dual_bound_m < ANALYTIC_PRICE_BOUND {
            return Err(Error::BigMTooSmall {
                family: "bus price",
                value: self.dual_bound_m,
                required: ANALYTIC_PRICE_BOUND,
            });
        }
        if let Some(m) = self.flow_dual_m {
            positive("flow_dual_m", m)?;
            // an uncongested branch carries mu = lambda_f - lambda_t
            if m < 2.0 * ANALYTIC_PRICE_BOUND {
                return Err(Error::BigMTooSmall {
                    family: "flow dual",
                    value: m,
                    required: 2.0 * ANALYTIC_PRICE_BOUND,
                });
            }
        }
        if let Some(m) = self.load_price_m {
            positive("load_price_m", m)?;
            if m < ANALYTIC_PRICE_BOUND {
                return Err(Error::BigMTooSmall {
                    family: "load price",
                    value: m,
                    required: ANALYTIC_PRICE_BOUND,
                });
            }
        }
        Ok(())
    }

    /// `|lambda|` bound.
    pub fn price(&self) -> f64 {
        self.dual_bound_m
    }

    /// `|mu_l|` bound: a branch row touches two buses plus its two bounds.
    pub fn flow_dual(&self) -> f64 {
        self.flow_dual_m.unwrap_or(4.0 * self.dual_bound_m)
    }

    /// Bound on the flow-limit duals.
    pub fn flow_bound_dual(&self) -> f64 {
        self.flow_dual() + 2.0 * self.price()
    }

    /// Lower bound magnitude of `lambda_n + alpha_i` (its upper bound is 1).
    pub fn load_price(&self) -> f64 {
        self.load_price_m.unwrap_or(2.0 * self.dual_bound_m)
    }

    /// Angle bound that admits every feasible flow pattern: along a spanning
    /// forest path no angle moves more than the sum of the `N - 1` largest
    /// `F_l x_l`, so the configured bound is raised to at least that.
    pub fn angle_bound_for(&self, case: &GridCase) -> f64 {
        let mut spans: Vec<f64> = case
            .branches
            .iter()
            .map(|b| case.to_pu(b.flow_limit) * b.reactance_x)
            .collect();
        spans.sort_by(|a, b| b.total_cmp(a));
        let needed: f64 = spans.iter().take(case.buses.len().saturating_sub(1)).sum();
        self.angle_bound_rad.max(needed)
    }
}

/// Attack, realization and prices at the subproblem optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSolution {
    pub attack: AttackPlan,
    pub realization: UncertaintyRealization,
    /// Worst-case shed for the defense, from the MILP (MW).
    pub eta_mw: f64,
    /// Dispatch shed re-solved at the returned attack and realization (MW).
    pub confirmed_shed_mw: f64,
    /// Dual prices at the optimum, per unit, in the dispatch convention.
    pub duals: DispatchDuals,
    pub stats: SolveStats,
}

/// A coefficient that is either a known constant or a binary variable.
#[derive(Debug, Clone, Copy)]
enum Indicator {
    Fixed(f64),
    Var(VarId),
}

/// Dual-variable handles.
#[derive(Debug, Clone)]
pub struct DualVars {
    pub lambda: Vec<VarId>,
    pub mu: Vec<VarId>,
    pub theta_lo: Vec<VarId>,
    pub theta_up: Vec<VarId>,
    pub gamma: Vec<VarId>,
    pub beta: Vec<VarId>,
    pub alpha: Vec<VarId>,
}

impl DualVars {
    fn read(&self, x: &[f64]) -> DispatchDuals {
        let get = |vs: &[VarId]| vs.iter().map(|v| x[v.0]).collect();
        DispatchDuals {
            balance: get(&self.lambda),
            flow_definition: get(&self.mu),
            flow_lower: get(&self.theta_lo),
            flow_upper: get(&self.theta_up),
            gen_upper: get(&self.gamma),
            wind_upper: get(&self.beta),
            shed_upper: get(&self.alpha),
        }
    }
}

/// Handles of a built subproblem MILP.
#[derive(Debug, Clone)]
pub struct SubproblemModel {
    pub model: LinearModel,
    pub duals: DualVars,
    /// Attack binaries (`None` for defended elements, which cannot fall).
    pub v_branch: Vec<Option<VarId>>,
    pub v_gen: Vec<Option<VarId>>,
    /// Upward load deviations. Downward ones never raise the shed, so they
    /// get no binaries.
    pub z_load_up: Vec<VarId>,
    /// Downward wind deviations. Extra wind can always be curtailed, so
    /// upward ones get no binaries.
    pub z_wind_down: Vec<VarId>,
}

/// `zeta = x * y` for binary `x` and `y` in `[lo, hi]`.
fn envelope(m: &mut LinearModel, prefix: &'static str, id: u32, x: VarId, y: VarId, lo: f64, hi: f64) -> VarId {
    let z = m.continuous(Name::new(prefix, id), lo.min(0.0), hi.max(0.0));
    m.row(Name::new(prefix, id), [(z, 1.0), (x, -lo)], RowSense::Ge, 0.0);
    m.row(Name::new(prefix, id), [(z, 1.0), (x, -hi)], RowSense::Le, 0.0);
    m.row(Name::new(prefix, id), [(z, 1.0), (y, -1.0), (x, -hi)], RowSense::Ge, -hi);
    m.row(Name::new(prefix, id), [(z, 1.0), (y, -1.0), (x, -lo)], RowSense::Le, -lo);
    z
}

/// Adds `ind * y` to `terms` with coefficient `coef`, creating the product
/// variable when `ind` is a binary.
#[allow(clippy::too_many_arguments)]
fn times(
    m: &mut LinearModel,
    prefix: &'static str,
    id: u32,
    ind: Indicator,
    y: VarId,
    (lo, hi): (f64, f64),
    coef: f64,
    terms: &mut Vec<(VarId, f64)>,
) {
    match ind {
        Indicator::Fixed(s) => {
            if s != 0.0 {
                terms.push((y, coef * s));
            }
        }
        Indicator::Var(x) => {
            let z = envelope(m, prefix, id, x, y, lo, hi);
            terms.push((z, coef));
        }
    }
}

/// Builds the dual of the dispatch LP. With `bounds = None` every indicator
/// must be fixed and the dual variables keep only their sign restrictions.
#[allow(clippy::too_many_arguments)]
fn build_dual(
    case: &GridCase,
    m: &mut LinearModel,
    s_branch: &[Indicator],
    s_gen: &[Indicator],
    z_load: &[(Indicator, Indicator)],
    z_wind: &[(Indicator, Indicator)],
    bounds: Option<&BigMConfig>,
) -> DualVars {
    let topo = case.topology();
    let inf = f64::INFINITY;
    let (price, flow_dual, flow_bound, load_price) = match bounds {
        Some(b) => (b.price(), b.flow_dual(), b.flow_bound_dual(), b.load_price()),
        None => (inf, inf, inf, inf),
    };
    let lambda: Vec<VarId> = case
        .buses
        .iter()
        .map(|b| m.continuous(Name::new("lambda", b.id), -price, price))
        .collect();
    let mu: Vec<VarId> = case
        .branches
        .iter()
        .map(|b| m.continuous(Name::new("mu", b.id), -flow_dual, flow_dual))
        .collect();
    let theta_lo: Vec<VarId> = case
        .branches
        .iter()
        .map(|b| m.continuous(Name::new("theta_lo", b.id), 0.0, flow_bound))
        .collect();
    let theta_up: Vec<VarId> = case
        .branches
        .iter()
        .map(|b| m.continuous(Name::new("theta_up", b.id), -flow_bound, 0.0))
        .collect();
    let gamma: Vec<VarId> = case
        .generators
        .iter()
        .map(|g| m.continuous(Name::new("gamma", g.id), -price, 0.0))
        .collect();
    let beta: Vec<VarId> = case
        .wind_farms
        .iter()
        .map(|w| m.continuous(Name::new("beta", w.id), -price, 0.0))
        .collect();
    let alpha: Vec<VarId> = case
        .loads
        .iter()
        .map(|l| m.continuous(Name::new("alpha", l.id), -load_price, 0.0))
        .collect();

    // stationarity in the angles
    let mut bus_terms: Vec<Vec<(VarId, f64)>> = alloc::vec![Vec::new(); case.buses.len()];
    for (l, b) in case.branches.iter().enumerate() {
        let y = 1.0 / b.reactance_x;
        let mut t = Vec::new();
        times(m, "psi", b.id, s_branch[l], mu[l], (-flow_dual, flow_dual), y, &mut t);
        for &(var, a) in &t {
            bus_terms[topo.from[l]].push((var, a));
            bus_terms[topo.to[l]].push((var, -a));
        }
    }
    for (n, terms) in bus_terms.into_iter().enumerate() {
        m.row(Name::new("stat_delta", case.buses[n].id), terms, RowSense::Eq, 0.0);
    }
    for (l, b) in case.branches.iter().enumerate() {
        m.row(
            Name::new("stat_flow", b.id),
            [
                (mu[l], 1.0),
                (lambda[topo.from[l]], -1.0),
                (lambda[topo.to[l]], 1.0),
                (theta_lo[l], 1.0),
                (theta_up[l], 1.0),
            ],
            RowSense::Eq,
            0.0,
        );
        let f = case.to_pu(b.flow_limit);
        m.add_objective(theta_up[l], f);
        m.add_objective(theta_lo[l], -f);
    }
    for (j, g) in case.generators.iter().enumerate() {
        let mut t = alloc::vec![(gamma[j], 1.0)];
        times(m, "phi", g.id, s_gen[j], lambda[topo.gen_bus[j]], (-price, price), 1.0, &mut t);
        m.row(Name::new("stat_gen", g.id), t, RowSense::Le, 0.0);
        m.add_objective(gamma[j], case.to_pu(g.p_max));
    }
    for (k, w) in case.wind_farms.iter().enumerate() {
        m.row(
            Name::new("stat_wind", w.id),
            [(lambda[topo.farm_bus[k]], 1.0), (beta[k], 1.0)],
            RowSense::Le,
            0.0,
        );
        let (up, down) = z_wind[k];
        let mut obj = alloc::vec![(beta[k], case.to_pu(w.expected_mw))];
        times(m, "omega_up", w.id, up, beta[k], (-price, 0.0), case.to_pu(w.dev_up_mw), &mut obj);
        times(m, "omega_dn", w.id, down, beta[k], (-price, 0.0), -case.to_pu(w.dev_down_mw), &mut obj);
        for (v, a) in obj {
            m.add_objective(v, a);
        }
    }
    for (i, l) in case.loads.iter().enumerate() {
        let n = topo.load_bus[i];
        m.row(Name::new("stat_shed", l.id), [(lambda[n], 1.0), (alpha[i], 1.0)], RowSense::Le, 1.0);
        let (up, down) = z_load[i];
        let mut obj = alloc::vec![(lambda[n], case.to_pu(l.expected_mw)), (alpha[i], case.to_pu(l.expected_mw))];
        let fixed = |ind: Indicator| matches!(ind, Indicator::Fixed(_));
        if fixed(up) && fixed(down) {
            for ind_dev in [(up, l.dev_up_mw), (down, -l.dev_down_mw)] {
                if let (Indicator::Fixed(zv), dev) = ind_dev {
                    obj.push((lambda[n], zv * case.to_pu(dev)));
                    obj.push((alpha[i], zv * case.to_pu(dev)));
                }
            }
        } else {
            let pi = m.continuous(Name::new("pi", l.id), -load_price, 1.0);
            m.row(
                Name::new("pi", l.id),
                [(pi, 1.0), (lambda[n], -1.0), (alpha[i], -1.0)],
                RowSense::Eq,
                0.0,
            );
            times(m, "rho_up", l.id, up, pi, (-load_price, 1.0), case.to_pu(l.dev_up_mw), &mut obj);
            times(m, "rho_dn", l.id, down, pi, (-load_price, 1.0), -case.to_pu(l.dev_down_mw), &mut obj);
        }
        for (v, a) in obj {
            m.add_objective(v, a);
        }
    }
    DualVars {
        lambda,
        mu,
        theta_lo,
        theta_up,
        gamma,
        beta,
        alpha,
    }
}

/// The exact dual of the dispatch LP for a fixed service state and
/// realization (MW inputs), as a maximization in per-unit prices.
pub fn derive_dual_model(
    case: &GridCase,
    state: &ServiceState,
    loads_mw: &[f64],
    wind_mw: &[f64],
) -> (LinearModel, DualVars) {
    let fixed = |on: &bool| Indicator::Fixed(if *on { 1.0 } else { 0.0 });
    let s_branch: Vec<Indicator> = state.branch_in_service.iter().map(fixed).collect();
    let s_gen: Vec<Indicator> = state.gen_in_service.iter().map(fixed).collect();
    // realized values enter as "expected + 1 * deviation" against a zero
    // deviation-free base, so express them through a shadow case
    let mut shadow = case.clone();
    for (l, &d) in shadow.loads.iter_mut().zip(loads_mw) {
        l.expected_mw = d;
    }
    for (w, &a) in shadow.wind_farms.iter_mut().zip(wind_mw) {
        w.expected_mw = a;
    }
    let none = (Indicator::Fixed(0.0), Indicator::Fixed(0.0));
    let z_load = alloc::vec![none; case.loads.len()];
    let z_wind = alloc::vec![none; case.wind_farms.len()];
    let mut m = LinearModel::new(ObjSense::Maximize);
    let vars = build_dual(&shadow, &mut m, &s_branch, &s_gen, &z_load, &z_wind, None);
    (m, vars)
}

/// Builds the single-level subproblem MILP for a fixed defense.
pub fn build_subproblem(case: &GridCase, defense: &DefensePlan, bigm: &BigMConfig) -> Result<SubproblemModel> {
    defense.check(case)?;
    bigm.check()?;
    let mut m = LinearModel::new(ObjSense::Maximize);
    let v_branch: Vec<Option<VarId>> = case
        .branches
        .iter()
        .zip(&defense.branch_defend)
        .map(|(b, &w)| (!w).then(|| m.binary(Name::new("v_f", b.id))))
        .collect();
    let v_gen: Vec<Option<VarId>> = case
        .generators
        .iter()
        .zip(&defense.gen_defend)
        .map(|(g, &w)| (!w).then(|| m.binary(Name::new("v_g", g.id))))
        .collect();
    let z_load_up: Vec<VarId> = case.loads.iter().map(|l| m.binary(Name::new("zd_up", l.id))).collect();
    let z_wind_down: Vec<VarId> = case.wind_farms.iter().map(|w| m.binary(Name::new("zw_dn", w.id))).collect();

    // attack budget: sum c (1 - v) <= r^A
    let mut attack_terms = Vec::new();
    let mut fixed_cost = 0.0;
    for (v, b) in v_branch.iter().zip(&case.branches) {
        if let Some(v) = *v {
            attack_terms.push((v, -b.attack_cost));
            fixed_cost += b.attack_cost;
        }
    }
    for (v, g) in v_gen.iter().zip(&case.generators) {
        if let Some(v) = *v {
            attack_terms.push((v, -g.attack_cost));
            fixed_cost += g.attack_cost;
        }
    }
    m.row(
        Name::scalar("attack_budget"),
        attack_terms,
        RowSense::Le,
        case.budgets.attack_budget - fixed_cost,
    );
    m.row(
        Name::scalar("budget_d"),
        z_load_up.iter().map(|&z| (z, 1.0)),
        RowSense::Le,
        case.budgets.load_uncertainty_budget,
    );
    m.row(
        Name::scalar("budget_w"),
        z_wind_down.iter().map(|&z| (z, 1.0)),
        RowSense::Le,
        case.budgets.wind_uncertainty_budget,
    );
    // interchangeable elements fall in id order
    for group in twin_branches(case) {
        order_attacks(&mut m, "sym_f", &group, &v_branch, |l| case.branches[l].id);
    }
    for group in twin_generators(case) {
        order_attacks(&mut m, "sym_g", &group, &v_gen, |j| case.generators[j].id);
    }

    let ind = |v: &Option<VarId>| v.map_or(Indicator::Fixed(1.0), Indicator::Var);
    let s_branch: Vec<Indicator> = v_branch.iter().map(ind).collect();
    let s_gen: Vec<Indicator> = v_gen.iter().map(ind).collect();
    let z_load: Vec<(Indicator, Indicator)> = z_load_up
        .iter()
        .map(|&u| (Indicator::Var(u), Indicator::Fixed(0.0)))
        .collect();
    let z_wind: Vec<(Indicator, Indicator)> = z_wind_down
        .iter()
        .map(|&d| (Indicator::Fixed(0.0), Indicator::Var(d)))
        .collect();
    let duals = build_dual(case, &mut m, &s_branch, &s_gen, &z_load, &z_wind, Some(bigm));
    Ok(SubproblemModel {
        model: m,
        duals,
        v_branch,
        v_gen,
        z_load_up,
        z_wind_down,
    })
}

/// Groups (two or more, in index order) of parallel branches with equal
/// reactance, limit and costs.
pub fn twin_branches(case: &GridCase) -> Vec<Vec<usize>> {
    group_by_key(case.branches.iter().map(|b| {
        let (lo, hi) = if b.from_bus <= b.to_bus { (b.from_bus, b.to_bus) } else { (b.to_bus, b.from_bus) };
        [
            u64::from(lo),
            u64::from(hi),
            b.reactance_x.to_bits(),
            b.flow_limit.to_bits(),
            b.defense_cost.to_bits(),
            b.attack_cost.to_bits(),
        ]
    }))
}

/// Groups of generators at the same bus with equal capacity and costs.
pub fn twin_generators(case: &GridCase) -> Vec<Vec<usize>> {
    group_by_key(case.generators.iter().map(|g| {
        [
            u64::from(g.bus),
            g.p_max.to_bits(),
            g.defense_cost.to_bits(),
            g.attack_cost.to_bits(),
            0,
            0,
        ]
    }))
}

fn group_by_key(keys: impl Iterator<Item = [u64; 6]>) -> Vec<Vec<usize>> {
    let mut groups: alloc::collections::BTreeMap<[u64; 6], Vec<usize>> = alloc::collections::BTreeMap::new();
    for (i, k) in keys.enumerate() {
        groups.entry(k).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().filter(|g| g.len() > 1).collect();
    out.sort();
    out
}

/// `v_a <= v_b` for consecutive attackable members: the lower index falls first.
fn order_attacks(
    m: &mut LinearModel,
    prefix: &'static str,
    group: &[usize],
    v: &[Option<VarId>],
    id: impl Fn(usize) -> u32,
) {
    let open: Vec<(usize, VarId)> = group.iter().filter_map(|&e| v[e].map(|x| (e, x))).collect();
    for pair in open.windows(2) {
        m.row(Name::new(prefix, id(pair[1].0)), [(pair[0].1, 1.0), (pair[1].1, -1.0)], RowSense::Le, 0.0);
    }
}

fn shed_of(
    case: &GridCase,
    defense: &DefensePlan,
    attack: &AttackPlan,
    r: &UncertaintyRealization,
    backend: &mut dyn Backend,
) -> Result<f64> {
    let state = ServiceState::new(defense, attack);
    let loads = r.realized_loads_mw(case)?;
    let wind = r.realized_wind_mw(case)?;
    Ok(solve_dispatch_state(case, &state, &loads, &wind, backend)?.total_shed_mw)
}

/// Keeps only attacks on undefended elements and the deviation directions
/// the subproblem models.
fn adapt(defense: &DefensePlan, attack: &AttackPlan, r: &UncertaintyRealization) -> (AttackPlan, UncertaintyRealization) {
    let keep = |intact: &[bool], defended: &[bool]| intact.iter().zip(defended).map(|(&i, &d)| i || d).collect();
    let attack = AttackPlan {
        branch_intact: keep(&attack.branch_intact, &defense.branch_defend),
        gen_intact: keep(&attack.gen_intact, &defense.gen_defend),
    };
    let r = UncertaintyRealization {
        load_z_up: r.load_z_up.iter().map(|&z| libm::round(z)).collect(),
        load_z_down: alloc::vec![0.0; r.load_z_down.len()],
        wind_z_up: alloc::vec![0.0; r.wind_z_up.len()],
        wind_z_down: r.wind_z_down.iter().map(|&z| libm::round(z)).collect(),
    };
    (attack, r)
}

const MAX_SWAP_PASSES: usize = 20;

/// Greedy attacker (one element at a time, largest shed first, then swaps)
/// against the largest deviations, then greedy nature against that attack.
fn greedy_moves(
    case: &GridCase,
    defense: &DefensePlan,
    backend: &mut dyn Backend,
) -> Result<Vec<(AttackPlan, UncertaintyRealization)>> {
    let b = &case.budgets;
    let mut stress = UncertaintyRealization::nominal_for(case);
    let mut order: Vec<usize> = (0..case.loads.len()).collect();
    order.sort_by(|&x, &y| case.loads[y].dev_up_mw.total_cmp(&case.loads[x].dev_up_mw).then(x.cmp(&y)));
    for &i in order.iter().take(b.load_budget_count()) {
        stress.load_z_up[i] = 1.0;
    }
    let mut order: Vec<usize> = (0..case.wind_farms.len()).collect();
    order.sort_by(|&x, &y| case.wind_farms[y].dev_down_mw.total_cmp(&case.wind_farms[x].dev_down_mw).then(x.cmp(&y)));
    for &k in order.iter().take(b.wind_budget_count()) {
        stress.wind_z_down[k] = 1.0;
    }

    let nl = case.branches.len();
    let cost = |e: usize| if e < nl { case.branches[e].attack_cost } else { case.generators[e - nl].attack_cost };
    let mut attack = AttackPlan::no_attack(case);
    let mut spent = 0.0;
    loop {
        let mut best: Option<(f64, usize)> = None;
        for e in 0..case.element_count() {
            let (defended, intact) = if e < nl {
                (defense.branch_defend[e], attack.branch_intact[e])
            } else {
                (defense.gen_defend[e - nl], attack.gen_intact[e - nl])
            };
            if defended || !intact || spent + cost(e) > b.attack_budget + 1e-9 {
                continue;
            }
            let mut trial = attack.clone();
            if e < nl {
                trial.branch_intact[e] = false;
            } else {
                trial.gen_intact[e - nl] = false;
            }
            let shed = shed_of(case, defense, &trial, &stress, backend)?;
            if best.map_or(true, |(s, _)| shed > s) {
                best = Some((shed, e));
            }
        }
        let Some((_, e)) = best else { break };
        if e < nl {
            attack.branch_intact[e] = false;
        } else {
            attack.gen_intact[e - nl] = false;
        }
        spent += cost(e);
    }

    // one-for-one swaps while they help
    let flip = |a: &mut AttackPlan, e: usize| {
        if e < nl {
            a.branch_intact[e] = !a.branch_intact[e];
        } else {
            a.gen_intact[e - nl] = !a.gen_intact[e - nl];
        }
    };
    let status = |a: &AttackPlan, e: usize| {
        if e < nl {
            (defense.branch_defend[e], a.branch_intact[e])
        } else {
            (defense.gen_defend[e - nl], a.gen_intact[e - nl])
        }
    };
    let mut current = shed_of(case, defense, &attack, &stress, backend)?;
    for _ in 0..MAX_SWAP_PASSES {
        let mut swapped = false;
        'search: for out in 0..case.element_count() {
            if status(&attack, out).1 {
                continue;
            }
            for inn in 0..case.element_count() {
                let (defended, intact) = status(&attack, inn);
                if defended || !intact || spent - cost(out) + cost(inn) > b.attack_budget + 1e-9 {
                    continue;
                }
                let mut trial = attack.clone();
                flip(&mut trial, out);
                flip(&mut trial, inn);
                let shed = shed_of(case, defense, &trial, &stress, backend)?;
                if shed > current + 1e-9 {
                    attack = trial;
                    spent += cost(inn) - cost(out);
                    current = shed;
                    swapped = true;
                    break 'search;
                }
            }
        }
        if !swapped {
            break;
        }
    }

    let mut nature = UncertaintyRealization::nominal_for(case);
    for _ in 0..b.load_budget_count().min(case.loads.len()) {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..case.loads.len() {
            if nature.load_z_up[i] != 0.0 {
                continue;
            }
            nature.load_z_up[i] = 1.0;
            let shed = shed_of(case, defense, &attack, &nature, backend)?;
            nature.load_z_up[i] = 0.0;
            if best.map_or(true, |(s, _)| shed > s) {
                best = Some((shed, i));
            }
        }
        if let Some((_, i)) = best {
            nature.load_z_up[i] = 1.0;
        }
    }
    for _ in 0..b.wind_budget_count().min(case.wind_farms.len()) {
        let mut best: Option<(f64, usize)> = None;
        for k in 0..case.wind_farms.len() {
            if nature.wind_z_down[k] != 0.0 {
                continue;
            }
            nature.wind_z_down[k] = 1.0;
            let shed = shed_of(case, defense, &attack, &nature, backend)?;
            nature.wind_z_down[k] = 0.0;
            if best.map_or(true, |(s, _)| shed > s) {
                best = Some((shed, k));
            }
        }
        if let Some((_, k)) = best {
            nature.wind_z_down[k] = 1.0;
        }
    }
    Ok(alloc::vec![(attack.clone(), stress), (attack, nature)])
}

/// Moves attacks within each twin group onto the lowest undefended indices.
fn canonical_twins(case: &GridCase, defense: &DefensePlan, attack: &mut AttackPlan) {
    fn apply(groups: Vec<Vec<usize>>, defended: &[bool], intact: &mut [bool]) {
        for g in groups {
            let open: Vec<usize> = g.into_iter().filter(|&e| !defended[e]).collect();
            let hit = open.iter().filter(|&&e| !intact[e]).count();
            for (k, &e) in open.iter().enumerate() {
                intact[e] = k >= hit;
            }
        }
    }
    apply(twin_branches(case), &defense.branch_defend, &mut attack.branch_intact);
    apply(twin_generators(case), &defense.gen_defend, &mut attack.gen_intact);
}

/// A full MILP point for the best candidate move: binaries set from the
/// move, the rest from the LP that remains.
fn warm_start(
    case: &GridCase,
    defense: &DefensePlan,
    sp: &SubproblemModel,
    hints: &[(AttackPlan, UncertaintyRealization)],
    backend: &mut dyn Backend,
) -> Result<Option<Vec<f64>>> {
    let mut candidates: Vec<_> = hints.iter().map(|(a, r)| adapt(defense, a, r)).collect();
    candidates.extend(greedy_moves(case, defense, backend)?);
    for (a, _) in &mut candidates {
        canonical_twins(case, defense, a);
    }
    let mut best: Option<(f64, usize)> = None;
    for (c, (a, r)) in candidates.iter().enumerate() {
        let shed = shed_of(case, defense, a, r, backend)?;
        if best.map_or(true, |(s, _)| shed > s) {
            best = Some((shed, c));
        }
    }
    let Some((_, c)) = best else { return Ok(None) };
    let (attack, r) = &candidates[c];
    let mut x = alloc::vec![0.0; sp.model.vars.len()];
    let set = |x: &mut Vec<f64>, v: &Option<VarId>, on: bool| {
        if let Some(v) = v {
            x[v.0] = if on { 1.0 } else { 0.0 };
        }
    };
    for (v, &on) in sp.v_branch.iter().zip(&attack.branch_intact) {
        set(&mut x, v, on);
    }
    for (v, &on) in sp.v_gen.iter().zip(&attack.gen_intact) {
        set(&mut x, v, on);
    }
    for (v, &z) in sp.z_load_up.iter().zip(&r.load_z_up) {
        x[v.0] = z;
    }
    for (v, &z) in sp.z_wind_down.iter().zip(&r.wind_z_down) {
        x[v.0] = z;
    }
    let fixed = fix_binaries(&sp.model, &x)?;
    let lp = backend.solve_lp(&fixed)?;
    if lp.status != SolveStatus::Optimal {
        return Ok(None);
    }
    let mut start = lp.values;
    for (j, v) in sp.model.vars.iter().enumerate() {
        if v.kind == crate::lp::VarKind::Binary {
            start[j] = x[j];
        }
    }
    Ok(Some(start))
}

/// Worst attack and realization for `defense`, confirmed by re-solving the
/// dispatch LP at the returned point.
pub fn solve_subproblem(
    case: &GridCase,
    defense: &DefensePlan,
    bigm: &BigMConfig,
    backend: &mut dyn Backend,
) -> Result<SubproblemSolution> {
    solve_subproblem_hinted(case, defense, bigm, &[], backend)
}

/// [`solve_subproblem`] warm-started from the best of `hints` (earlier moves,
/// adapted to `defense`) and a greedy move. Hints only speed up the search.
pub fn solve_subproblem_hinted(
    case: &GridCase,
    defense: &DefensePlan,
    bigm: &BigMConfig,
    hints: &[(AttackPlan, UncertaintyRealization)],
    backend: &mut dyn Backend,
) -> Result<SubproblemSolution> {
    let sp = build_subproblem(case, defense, bigm)?;
    sp.model.lint()?;
    let start = warm_start(case, defense, &sp, hints, backend)?;
    let out = solve_milp_polished_from(backend, &sp.model, start.as_deref())
        .map_err(|e| Error::from(e).context("subproblem MILP"))?;
    let flag = |v: &Option<VarId>| v.map_or(true, |v| out.flag(v));
    let attack = AttackPlan {
        branch_intact: sp.v_branch.iter().map(flag).collect(),
        gen_intact: sp.v_gen.iter().map(flag).collect(),
    };
    let bits = |vs: &[VarId]| vs.iter().map(|&v| if out.flag(v) { 1.0 } else { 0.0 }).collect();
    let realization = UncertaintyRealization {
        load_z_up: bits(&sp.z_load_up),
        load_z_down: alloc::vec![0.0; case.loads.len()],
        wind_z_up: alloc::vec![0.0; case.wind_farms.len()],
        wind_z_down: bits(&sp.z_wind_down),
    };
    let eta_mw = case.to_mw(out.objective);
    let confirmed = solve_dispatch(case, defense, &attack, &realization, backend)?;
    if (confirmed.total_shed_mw - eta_mw).abs() > CHECK_TOL_MW {
        return Err(Error::PostCheck {
            what: "subproblem",
            model_mw: eta_mw,
            dispatch_mw: confirmed.total_shed_mw,
        });
    }
    Ok(SubproblemSolution {
        attack,
        realization,
        eta_mw,
        confirmed_shed_mw: confirmed.total_shed_mw,
        duals: sp.duals.read(&out.values),
        stats: out.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tests::{single_bus, three_bus};
    use crate::lp::PureBackend;
    use crate::testutil::{arb_case, some_attack, some_realization};
    use crate::uncertainty::enumerate_extreme_realizations;

    /// Exhaustive max over budget-feasible attacks (unit costs) and extreme
    /// realizations of the dispatch shed.
    fn brute_force(case: &GridCase, defense: &DefensePlan) -> f64 {
        let n = case.element_count();
        let budget = case.budgets.attack_budget as usize;
        let mut best: f64 = 0.0;
        let mut backend = PureBackend::default();
        for mask in 0u32..1 << n {
            if mask.count_ones() as usize > budget {
                continue;
            }
            let chosen: Vec<usize> = (0..n).filter(|e| mask >> e & 1 == 1).collect();
            let attack = AttackPlan::from_elements(case, &chosen);
            for r in enumerate_extreme_realizations(case, 1 << 20).unwrap() {
                let d = solve_dispatch(case, defense, &attack, &r, &mut backend).unwrap();
                best = best.max(d.total_shed_mw);
            }
        }
        best
    }

    fn eta(case: &GridCase, defense: &DefensePlan) -> SubproblemSolution {
        solve_subproblem(case, defense, &BigMConfig::default(), &mut PureBackend::default()).unwrap()
    }

    #[test]
    fn single_bus_attack_and_load_up() {
        let c = single_bus(0.0, 1.0, 1.0);
        let s = eta(&c, &DefensePlan::none(&c));
        assert!((s.eta_mw - 110.0).abs() < 1e-6);
        assert!(!s.attack.gen_intact[0]);
        assert_eq!(s.realization.load_z_up, [1.0]);
    }

    #[test]
    fn single_bus_defended_generator() {
        let mut c = single_bus(1.0, 1.0, 1.0);
        c.budgets.defense_budget = 1.0;
        let d = DefensePlan::from_elements(&c, &[0]);
        let s = eta(&c, &d);
        assert!((s.eta_mw - 10.0).abs() < 1e-6);
        assert!(s.attack.is_empty());
        assert_eq!(s.realization.load_z_up, [1.0]);
    }

    #[test]
    fn frozen_adversary_gives_nominal_shed() {
        let c = three_bus(0.0, 0.0, 0.0, 0.0);
        let s = eta(&c, &DefensePlan::none(&c));
        assert!(s.eta_mw.abs() < 1e-9);
        assert!(s.attack.is_empty());
    }

    #[test]
    fn structure_of_single_bus_model() {
        let c = single_bus(0.0, 1.0, 1.0);
        let sp = build_subproblem(&c, &DefensePlan::none(&c), &BigMConfig::default()).unwrap();
        let binaries: Vec<_> = sp
            .model
            .vars
            .iter()
            .filter(|v| v.kind == crate::lp::VarKind::Binary)
            .map(|v| alloc::format!("{}", v.name))
            .collect();
        assert_eq!(binaries, ["v_g_1", "zd_up_1"]);
        let names: Vec<_> = sp.model.rows.iter().map(|r| alloc::format!("{}", r.name)).collect();
        assert!(names.contains(&"attack_budget".into()));
        assert!(names.contains(&"budget_d".into()));
        // building twice gives identical models
        let again = build_subproblem(&c, &DefensePlan::none(&c), &BigMConfig::default()).unwrap();
        assert_eq!(sp.model, again.model);
    }

    #[test]
    fn three_bus_matches_enumeration() {
        let c = three_bus(0.0, 1.0, 1.0, 1.0);
        let s = eta(&c, &DefensePlan::none(&c));
        assert!((s.eta_mw - brute_force(&c, &DefensePlan::none(&c))).abs() < 1e-5);
    }

    #[test]
    fn undersized_bounds_are_rejected() {
        let c = single_bus(0.0, 1.0, 1.0);
        let small = BigMConfig {
            dual_bound_m: 0.5,
            ..BigMConfig::default()
        };
        assert!(matches!(
            build_subproblem(&c, &DefensePlan::none(&c), &small),
            Err(Error::BigMTooSmall { .. })
        ));
        let small_flow = BigMConfig {
            flow_dual_m: Some(1.0),
            ..BigMConfig::default()
        };
        assert!(matches!(
            build_subproblem(&c, &DefensePlan::none(&c), &small_flow),
            Err(Error::BigMTooSmall { .. })
        ));
    }

    #[test]
    fn dual_model_of_single_bus() {
        let c = single_bus(0.0, 0.0, 0.0);
        let state = ServiceState::all_in_service(&c);
        let (m, vars) = derive_dual_model(&c, &state, &[110.0], &[]);
        assert_eq!((vars.lambda.len(), vars.gamma.len(), vars.alpha.len()), (1, 1, 1));
        let rows: Vec<_> = m.rows.iter().map(|r| alloc::format!("{}", r.name)).collect();
        assert_eq!(rows, ["stat_delta_1", "stat_gen_1", "stat_shed_1"]);
        let out = PureBackend::default().solve_lp(&m).unwrap();
        assert!((c.to_mw(out.objective) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn twins_in_rts79() {
        let c = crate::rts79::make_modified_rts79();
        let groups = twin_generators(&c);
        assert!(!groups.is_empty());
        for g in &groups {
            let first = &c.generators[g[0]];
            assert!(g.windows(2).all(|w| w[0] < w[1]));
            assert!(g.iter().all(|&j| c.generators[j].bus == first.bus && c.generators[j].p_max == first.p_max));
        }
        let three = three_bus(1.0, 1.0, 1.0, 1.0);
        assert!(twin_branches(&three).is_empty());
    }

    #[test]
    fn twin_attacks_move_to_lowest_open_index() {
        let mut c = three_bus(1.0, 2.0, 0.0, 0.0);
        c.generators.push(crate::grid::tests::generator(2, 1, 100.0));
        c.generators.push(crate::grid::tests::generator(3, 1, 100.0));
        assert_eq!(twin_generators(&c), [[0, 1, 2]]);
        let mut defense = DefensePlan::none(&c);
        defense.gen_defend[0] = true;
        let mut attack = AttackPlan::no_attack(&c);
        attack.gen_intact[2] = false;
        canonical_twins(&c, &defense, &mut attack);
        assert_eq!(attack.gen_intact, [true, false, true]);
        let sp = build_subproblem(&c, &DefensePlan::none(&c), &BigMConfig::default()).unwrap();
        assert!(sp.model.rows.iter().any(|r| alloc::format!("{}", r.name).starts_with("sym_g_")));
    }

    #[test]
    fn greedy_finds_the_single_bus_attack() {
        let c = single_bus(0.0, 1.0, 1.0);
        let moves = greedy_moves(&c, &DefensePlan::none(&c), &mut PureBackend::default()).unwrap();
        assert!(!moves.is_empty());
        assert!(moves.iter().all(|(a, _)| !a.gen_intact[0]));
        assert!(moves.iter().any(|(_, r)| r.load_z_up == [1.0]));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn warm_start_is_feasible_and_not_better(case in arb_case(), seed in any::<u64>()) {
                let defense = DefensePlan::none(&case);
                let bigm = BigMConfig::default();
                let sp = build_subproblem(&case, &defense, &bigm).unwrap();
                let hints = [(some_attack(&case, seed), some_realization(&case, seed))];
                let mut b = PureBackend::default();
                let start = warm_start(&case, &defense, &sp, &hints, &mut b).unwrap().unwrap();
                prop_assert!(sp.model.max_violation(&start) < 1e-7);
                let full = solve_subproblem_hinted(&case, &defense, &bigm, &hints, &mut b).unwrap();
                prop_assert!(case.to_mw(sp.model.objective_value(&start)) <= full.eta_mw + 1e-6);
                let plain = solve_subproblem(&case, &defense, &bigm, &mut b).unwrap();
                prop_assert!((plain.eta_mw - full.eta_mw).abs() < 1e-6);
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn dual_model_value_equals_dispatch(case in arb_case(), seed in any::<u64>()) {
                let attack = some_attack(&case, seed);
                let r = some_realization(&case, seed);
                let state = ServiceState::new(&DefensePlan::none(&case), &attack);
                let loads = r.realized_loads_mw(&case).unwrap();
                let wind = r.realized_wind_mw(&case).unwrap();
                let mut backend = PureBackend::default();
                let primal = solve_dispatch_state(&case, &state, &loads, &wind, &mut backend).unwrap();
                let (m, _) = derive_dual_model(&case, &state, &loads, &wind);
                let dual = backend.solve_lp(&m).unwrap();
                prop_assert!((case.to_mw(dual.objective) - primal.total_shed_mw).abs() < 1e-6);
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn milp_matches_enumeration(case in arb_case(), dseed in any::<u64>()) {
                // a random budget-feasible defense
                let mut defense = DefensePlan::none(&case);
                let k = (case.budgets.defense_budget as usize).min(case.element_count());
                let picks = crate::testutil::some_attack(&case, dseed);
                let mut spent = 0;
                for (l, &intact) in picks.branch_intact.iter().enumerate() {
                    if !intact && spent < k { defense.branch_defend[l] = true; spent += 1; }
                }
                for (j, &intact) in picks.gen_intact.iter().enumerate() {
                    if !intact && spent < k { defense.gen_defend[j] = true; spent += 1; }
                }
                let s = eta(&case, &defense);
                let truth = brute_force(&case, &defense);
                prop_assert!((s.eta_mw - truth).abs() <= 1e-5, "milp {} vs enumeration {}", s.eta_mw, truth);
                prop_assert!((s.confirmed_shed_mw - s.eta_mw).abs() <= 1e-5);
                // no budget is spent on defended elements
                for (l, &w) in defense.branch_defend.iter().enumerate() {
                    if w { prop_assert!(s.attack.branch_intact[l]); }
                }
            }

            #[test]
            fn doubling_big_m_keeps_eta(case in arb_case()) {
                let d = DefensePlan::none(&case);
                let mut b = PureBackend::default();
                let base = solve_subproblem(&case, &d, &BigMConfig::default(), &mut b).unwrap();
                let wide = solve_subproblem(&case, &d, &BigMConfig::default().scaled(2.0), &mut b).unwrap();
                prop_assert!((base.eta_mw - wide.eta_mw).abs() < 1e-6);
            }

            #[test]
            fn defending_more_never_raises_eta(case in arb_case(), pick in any::<prop::sample::Index>()) {
                let mut case = case;
                case.budgets.defense_budget = 1.0;
                let none = DefensePlan::none(&case);
                let one = DefensePlan::from_elements(&case, &[pick.index(case.element_count())]);
                let a = eta(&case, &none).eta_mw;
                let b = eta(&case, &one).eta_mw;
                prop_assert!(b <= a + 1e-6);
            }
        }
    }
}
