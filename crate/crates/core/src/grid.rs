//! Static problem instance: buses, branches, generators, wind farms, loads,
//! and the four budgets.
//!
//! Case data is stored in MW and per-unit reactance on `base_mva`. Every
//! optimization model is built in per-unit; results are reported back in MW.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

fn default_cost() -> f64 {
    1.0
}

pub(crate) fn default_base_mva() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub id: u32,
    pub from_bus: u32,
    pub to_bus: u32,
    /// Series reactance in per-unit on the case base.
    pub reactance_x: f64,
    /// Thermal limit in MW, applied in both directions.
    pub flow_limit: f64,
    #[serde(default = "default_cost")]
    pub defense_cost: f64,
    #[serde(default = "default_cost")]
    pub attack_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub id: u32,
    pub bus: u32,
    pub p_max: f64,
    #[serde(default = "default_cost")]
    pub defense_cost: f64,
    #[serde(default = "default_cost")]
    pub attack_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindFarm {
    pub id: u32,
    pub bus: u32,
    pub expected_mw: f64,
    pub dev_up_mw: f64,
    pub dev_down_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadPoint {
    pub id: u32,
    pub bus: u32,
    pub expected_mw: f64,
    pub dev_up_mw: f64,
    pub dev_down_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub defense_budget: f64,
    pub attack_budget: f64,
    pub load_uncertainty_budget: f64,
    pub wind_uncertainty_budget: f64,
}

impl Budgets {
    /// Integer part of the load uncertainty budget. With binary factors a
    /// fractional budget is equivalent to its floor.
    pub fn load_budget_count(&self) -> usize {
        libm::floor(self.load_uncertainty_budget + 1e-9).max(0.0) as usize
    }

    pub fn wind_budget_count(&self) -> usize {
        libm::floor(self.wind_uncertainty_budget + 1e-9).max(0.0) as usize
    }
}

/// A complete problem instance. Immutable once validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCase {
    #[serde(default = "default_base_mva")]
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub branches: Vec<Branch>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub wind_farms: Vec<WindFarm>,
    #[serde(default)]
    pub loads: Vec<LoadPoint>,
    pub budgets: Budgets,
}

fn check_unique(
    kind: &str,
    ids: impl Iterator<Item = u32>,
    out: &mut Vec<Violation>,
) -> BTreeMap<u32, usize> {
    let mut seen = BTreeMap::new();
    for (pos, id) in ids.enumerate() {
        if seen.insert(id, pos).is_some() {
            out.push(Violation::new(format!("{kind} {id}"), "duplicate id"));
        }
    }
    seen
}

fn nonneg(v: &mut Vec<Violation>, subject: &str, field: &str, x: f64) {
    if !(x >= 0.0) || !x.is_finite() {
        v.push(Violation::new(subject, format!("{field} must be finite and >= 0 (got {x})")));
    }
}

fn positive(v: &mut Vec<Violation>, subject: &str, field: &str, x: f64) {
    if !(x > 0.0) || !x.is_finite() {
        v.push(Violation::new(subject, format!("{field} must be finite and > 0 (got {x})")));
    }
}

impl GridCase {
    /// Validates and returns the case, or every violated invariant at once.
    pub fn validated(self) -> Result<Self> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidCase(violations))
        }
    }

    /// Lists every violated invariant (empty when the case is valid).
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.buses.is_empty() {
            out.push(Violation::new("case", "at least one bus is required"));
        }
        positive(&mut out, "case", "base_mva", self.base_mva);

        let buses = check_unique("bus", self.buses.iter().map(|b| b.id), &mut out);
        check_unique("branch", self.branches.iter().map(|b| b.id), &mut out);
        check_unique("generator", self.generators.iter().map(|g| g.id), &mut out);
        check_unique("wind farm", self.wind_farms.iter().map(|w| w.id), &mut out);
        check_unique("load", self.loads.iter().map(|l| l.id), &mut out);

        let bus_ref = |subject: &str, field: &str, bus: u32, out: &mut Vec<Violation>| {
            if !buses.contains_key(&bus) {
                out.push(Violation::new(subject, format!("{field} references unknown bus {bus}")));
            }
        };

        for br in &self.branches {
            let s = format!("branch {}", br.id);
            bus_ref(&s, "from_bus", br.from_bus, &mut out);
            bus_ref(&s, "to_bus", br.to_bus, &mut out);
            if br.from_bus == br.to_bus {
                out.push(Violation::new(&s, "from_bus and to_bus must differ"));
            }
            positive(&mut out, &s, "reactance_x", br.reactance_x);
            nonneg(&mut out, &s, "flow_limit", br.flow_limit);
            positive(&mut out, &s, "defense_cost", br.defense_cost);
            positive(&mut out, &s, "attack_cost", br.attack_cost);
        }
        for g in &self.generators {
            let s = format!("generator {}", g.id);
            bus_ref(&s, "bus", g.bus, &mut out);
            nonneg(&mut out, &s, "p_max", g.p_max);
            positive(&mut out, &s, "defense_cost", g.defense_cost);
            positive(&mut out, &s, "attack_cost", g.attack_cost);
        }
        for w in &self.wind_farms {
            let s = format!("wind farm {}", w.id);
            bus_ref(&s, "bus", w.bus, &mut out);
            nonneg(&mut out, &s, "expected_mw", w.expected_mw);
            nonneg(&mut out, &s, "dev_up_mw", w.dev_up_mw);
            nonneg(&mut out, &s, "dev_down_mw", w.dev_down_mw);
            if w.dev_down_mw > w.expected_mw {
                out.push(Violation::new(&s, "dev_down_mw exceeds expected_mw"));
            }
        }
        for l in &self.loads {
            let s = format!("load {}", l.id);
            bus_ref(&s, "bus", l.bus, &mut out);
            nonneg(&mut out, &s, "expected_mw", l.expected_mw);
            nonneg(&mut out, &s, "dev_up_mw", l.dev_up_mw);
            nonneg(&mut out, &s, "dev_down_mw", l.dev_down_mw);
            if l.dev_down_mw > l.expected_mw {
                out.push(Violation::new(&s, "dev_down_mw exceeds expected_mw"));
            }
        }
        let b = &self.budgets;
        nonneg(&mut out, "budgets", "defense_budget", b.defense_budget);
        nonneg(&mut out, "budgets", "attack_budget", b.attack_budget);
        nonneg(&mut out, "budgets", "load_uncertainty_budget", b.load_uncertainty_budget);
        nonneg(&mut out, "budgets", "wind_uncertainty_budget", b.wind_uncertainty_budget);
        out
    }

    pub fn to_pu(&self, mw: f64) -> f64 {
        mw / self.base_mva
    }

    pub fn to_mw(&self, pu: f64) -> f64 {
        pu * self.base_mva
    }

    pub fn total_expected_load_mw(&self) -> f64 {
        self.loads.iter().map(|l| l.expected_mw).sum()
    }

    /// Number of attackable/defendable elements (branches, then generators).
    pub fn element_count(&self) -> usize {
        self.branches.len() + self.generators.len()
    }

    /// Index-based view of the network.
    pub fn topology(&self) -> Topology {
        let pos: BTreeMap<u32, usize> = self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let at = |id: u32| pos[&id];
        let reference_bus = self
            .buses
            .iter()
            .enumerate()
            .min_by_key(|(_, b)| b.id)
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut gens_at = vec![Vec::new(); self.buses.len()];
        let mut farms_at = vec![Vec::new(); self.buses.len()];
        let mut loads_at = vec![Vec::new(); self.buses.len()];
        let gen_bus: Vec<usize> = self.generators.iter().map(|g| at(g.bus)).collect();
        let farm_bus: Vec<usize> = self.wind_farms.iter().map(|w| at(w.bus)).collect();
        let load_bus: Vec<usize> = self.loads.iter().map(|l| at(l.bus)).collect();
        for (j, &n) in gen_bus.iter().enumerate() {
            gens_at[n].push(j);
        }
        for (k, &n) in farm_bus.iter().enumerate() {
            farms_at[n].push(k);
        }
        for (i, &n) in load_bus.iter().enumerate() {
            loads_at[n].push(i);
        }
        Topology {
            from: self.branches.iter().map(|b| at(b.from_bus)).collect(),
            to: self.branches.iter().map(|b| at(b.to_bus)).collect(),
            gen_bus,
            farm_bus,
            load_bus,
            gens_at,
            farms_at,
            loads_at,
            reference_bus,
        }
    }
}

/// Positional indices of every component's bus, and per-bus membership
/// lists (the sets J_n, K_n, I_n).
#[derive(Debug, Clone)]
pub struct Topology {
    pub from: Vec<usize>,
    pub to: Vec<usize>,
    pub gen_bus: Vec<usize>,
    pub farm_bus: Vec<usize>,
    pub load_bus: Vec<usize>,
    pub gens_at: Vec<Vec<usize>>,
    pub farms_at: Vec<Vec<usize>>,
    pub loads_at: Vec<Vec<usize>>,
    /// Position of the lowest-numbered bus; its angle is pinned to zero.
    pub reference_bus: usize,
}

impl Topology {
    pub fn bus_count(&self) -> usize {
        self.gens_at.len()
    }

    /// Branches touching bus `n` with their incidence sign.
    pub fn incident(&self, n: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.from.iter().zip(&self.to).enumerate().filter_map(move |(l, (&f, &t))| {
            if f == n {
                Some((l, 1.0))
            } else if t == n {
                Some((l, -1.0))
            } else {
                None
            }
        })
    }
}

/// Bus-branch incidence matrix: `+1` where the branch leaves the bus, `-1`
/// where it enters, `0` elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Incidence {
    buses: usize,
    branches: usize,
    entries: Vec<i8>,
}

impl Incidence {
    pub fn rows(&self) -> usize {
        self.buses
    }

    pub fn cols(&self) -> usize {
        self.branches
    }

    /// Entry for bus position `n` and branch position `l`.
    pub fn get(&self, n: usize, l: usize) -> i8 {
        self.entries[n * self.branches + l]
    }

    pub fn row(&self, n: usize) -> &[i8] {
        &self.entries[n * self.branches..(n + 1) * self.branches]
    }

    pub fn column(&self, l: usize) -> impl Iterator<Item = i8> + '_ {
        (0..self.buses).map(move |n| self.get(n, l))
    }
}

pub fn incidence(case: &GridCase) -> Incidence {
    let topo = case.topology();
    let (nb, nl) = (case.buses.len(), case.branches.len());
    let mut entries = vec![0i8; nb * nl];
    for l in 0..nl {
        entries[topo.from[l] * nl + l] = 1;
        entries[topo.to[l] * nl + l] = -1;
    }
    Incidence {
        buses: nb,
        branches: nl,
        entries,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn bus(id: u32) -> Bus {
        Bus { id, name: None }
    }

    pub fn branch(id: u32, from_bus: u32, to_bus: u32, x: f64, limit: f64) -> Branch {
        Branch {
            id,
            from_bus,
            to_bus,
            reactance_x: x,
            flow_limit: limit,
            defense_cost: 1.0,
            attack_cost: 1.0,
        }
    }

    pub fn generator(id: u32, bus: u32, p_max: f64) -> Generator {
        Generator {
            id,
            bus,
            p_max,
            defense_cost: 1.0,
            attack_cost: 1.0,
        }
    }

    pub fn load(id: u32, bus: u32, mw: f64, up: f64, down: f64) -> LoadPoint {
        LoadPoint {
            id,
            bus,
            expected_mw: mw,
            dev_up_mw: up,
            dev_down_mw: down,
        }
    }

    pub fn farm(id: u32, bus: u32, mw: f64, up: f64, down: f64) -> WindFarm {
        WindFarm {
            id,
            bus,
            expected_mw: mw,
            dev_up_mw: up,
            dev_down_mw: down,
        }
    }

    pub fn budgets(rd: f64, ra: f64, ud: f64, uw: f64) -> Budgets {
        Budgets {
            defense_budget: rd,
            attack_budget: ra,
            load_uncertainty_budget: ud,
            wind_uncertainty_budget: uw,
        }
    }

    /// Single bus, one 100 MW generator, one 80 MW load with ±30 MW.
    pub fn single_bus(rd: f64, ra: f64, ud: f64) -> GridCase {
        GridCase {
            base_mva: 100.0,
            buses: vec![bus(1)],
            branches: vec![],
            generators: vec![generator(1, 1, 100.0)],
            wind_farms: vec![],
            loads: vec![load(1, 1, 80.0, 30.0, 30.0)],
            budgets: budgets(rd, ra, ud, 0.0),
        }
    }

    /// gen(bus1, 100), load(bus2, 80 ±20), wind(bus3, 30 ±10),
    /// branches 1-2 / 2-3 / 1-3 with x = 0.1 and limits 100 / 50 / 50 MW.
    pub fn three_bus(rd: f64, ra: f64, ud: f64, uw: f64) -> GridCase {
        GridCase {
            base_mva: 100.0,
            buses: vec![bus(1), bus(2), bus(3)],
            branches: vec![
                branch(1, 1, 2, 0.1, 100.0),
                branch(2, 2, 3, 0.1, 50.0),
                branch(3, 1, 3, 0.1, 50.0),
            ],
            generators: vec![generator(1, 1, 100.0)],
            wind_farms: vec![farm(1, 3, 30.0, 10.0, 10.0)],
            loads: vec![load(1, 2, 80.0, 20.0, 20.0)],
            budgets: budgets(rd, ra, ud, uw),
        }
    }

    #[test]
    fn minimal_case_is_valid() {
        let c = single_bus(0.0, 0.0, 0.0).validated().unwrap();
        assert_eq!((c.buses.len(), c.generators.len(), c.loads.len()), (1, 1, 1));
    }

    #[test]
    fn unknown_bus_is_named() {
        let mut c = three_bus(0.0, 0.0, 0.0, 0.0);
        c.branches[1].to_bus = 99;
        let v = c.violations();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].subject, "branch 2");
        assert!(v[0].message.contains("99"));
    }

    #[test]
    fn all_violations_are_reported() {
        let mut c = three_bus(0.0, 0.0, 0.0, 0.0);
        c.branches[0].reactance_x = 0.0;
        c.branches[2].from_bus = 3;
        c.generators[0].attack_cost = 0.0;
        c.loads[0].dev_down_mw = 200.0;
        c.wind_farms[0].expected_mw = -1.0;
        c.budgets.attack_budget = -1.0;
        let v = c.violations();
        // the wind farm trips both the sign check and dev_down > expected
        assert_eq!(v.len(), 7, "{v:?}");
        assert!(matches!(c.validated(), Err(Error::InvalidCase(list)) if list.len() == 7));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut c = three_bus(0.0, 0.0, 0.0, 0.0);
        c.buses.push(bus(2));
        assert!(c.violations().iter().any(|v| v.subject == "bus 2"));
    }

    #[test]
    fn empty_case_rejected() {
        let c = GridCase {
            base_mva: 100.0,
            buses: vec![],
            branches: vec![],
            generators: vec![],
            wind_farms: vec![],
            loads: vec![],
            budgets: budgets(0.0, 0.0, 0.0, 0.0),
        };
        assert!(!c.violations().is_empty());
    }

    #[test]
    fn incidence_two_bus() {
        let c = GridCase {
            base_mva: 100.0,
            buses: vec![bus(1), bus(2)],
            branches: vec![branch(1, 1, 2, 0.1, 10.0)],
            generators: vec![],
            wind_farms: vec![],
            loads: vec![],
            budgets: budgets(0.0, 0.0, 0.0, 0.0),
        };
        let a = incidence(&c);
        assert_eq!((a.get(0, 0), a.get(1, 0)), (1, -1));
    }

    #[test]
    fn incidence_ring() {
        let a = incidence(&three_bus(0.0, 0.0, 0.0, 0.0));
        // branches: 1->2, 2->3, 1->3
        assert_eq!(a.row(0), &[1, 0, 1]);
        for l in 0..a.cols() {
            assert_eq!(a.column(l).map(i32::from).sum::<i32>(), 0);
        }
    }

    #[test]
    fn fractional_budgets_floor() {
        let b = budgets(0.0, 0.0, 2.7, 0.999_999_999_9);
        assert_eq!(b.load_budget_count(), 2);
        assert_eq!(b.wind_budget_count(), 1);
    }
}
