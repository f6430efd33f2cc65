//! Budget uncertainty sets for load demand and wind availability.
//!
//! Each load (and each wind farm) carries an upward and a downward factor in
//! `[0, 1]`; at most one of the two may be active per component, and the sum
//! of all factors is capped by the corresponding uncertainty budget.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Budgets, GridCase, LoadPoint, WindFarm};

const FACTOR_TOL: f64 = 1e-9;

/// Default refusal threshold for [`enumerate_extreme_realizations`].
pub const DEFAULT_REALIZATION_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

/// Nature's move: one `(up, down)` factor pair per load and per wind farm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRealization {
    pub load_z_up: Vec<f64>,
    pub load_z_down: Vec<f64>,
    pub wind_z_up: Vec<f64>,
    pub wind_z_down: Vec<f64>,
}

impl UncertaintyRealization {
    pub fn nominal(loads: usize, farms: usize) -> Self {
        Self {
            load_z_up: vec![0.0; loads],
            load_z_down: vec![0.0; loads],
            wind_z_up: vec![0.0; farms],
            wind_z_down: vec![0.0; farms],
        }
    }

    pub fn nominal_for(case: &GridCase) -> Self {
        Self::nominal(case.loads.len(), case.wind_farms.len())
    }

    /// Builds a binary realization from sparse `(index, direction)` lists.
    pub fn from_active(
        loads: usize,
        farms: usize,
        active_loads: &[(usize, Direction)],
        active_farms: &[(usize, Direction)],
    ) -> Self {
        let mut r = Self::nominal(loads, farms);
        for &(i, d) in active_loads {
            match d {
                Direction::Up => r.load_z_up[i] = 1.0,
                Direction::Down => r.load_z_down[i] = 1.0,
            }
        }
        for &(k, d) in active_farms {
            match d {
                Direction::Up => r.wind_z_up[k] = 1.0,
                Direction::Down => r.wind_z_down[k] = 1.0,
            }
        }
        r
    }

    pub fn is_binary(&self) -> bool {
        self.factors().all(|z| z == 0.0 || z == 1.0)
    }

    fn factors(&self) -> impl Iterator<Item = f64> + '_ {
        self.load_z_up
            .iter()
            .chain(&self.load_z_down)
            .chain(&self.wind_z_up)
            .chain(&self.wind_z_down)
            .copied()
    }

    /// Active load factors as `(position, direction)`, in position order.
    pub fn active_loads(&self) -> Vec<(usize, Direction)> {
        active(&self.load_z_up, &self.load_z_down)
    }

    pub fn active_farms(&self) -> Vec<(usize, Direction)> {
        active(&self.wind_z_up, &self.wind_z_down)
    }

    pub fn active_count(&self) -> usize {
        self.factors().filter(|&z| z > 0.5).count()
    }

    pub fn check_dims(&self, case: &GridCase) -> Result<()> {
        let (nl, nk) = (case.loads.len(), case.wind_farms.len());
        for (what, got, expected) in [
            ("load_z_up", self.load_z_up.len(), nl),
            ("load_z_down", self.load_z_down.len(), nl),
            ("wind_z_up", self.wind_z_up.len(), nk),
            ("wind_z_down", self.wind_z_down.len(), nk),
        ] {
            if got != expected {
                return Err(Error::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }

    /// Realized demand of every load, in MW.
    pub fn realized_loads_mw(&self, case: &GridCase) -> Result<Vec<f64>> {
        case.loads
            .iter()
            .zip(self.load_z_up.iter().zip(&self.load_z_down))
            .map(|(l, (&u, &d))| realize_load(l, u, d))
            .collect()
    }

    /// Realized wind availability of every farm, in MW.
    pub fn realized_wind_mw(&self, case: &GridCase) -> Result<Vec<f64>> {
        case.wind_farms
            .iter()
            .zip(self.wind_z_up.iter().zip(&self.wind_z_down))
            .map(|(w, (&u, &d))| realize_wind(w, u, d))
            .collect()
    }
}

fn active(up: &[f64], down: &[f64]) -> Vec<(usize, Direction)> {
    let mut out = Vec::new();
    for (i, (&u, &d)) in up.iter().zip(down).enumerate() {
        if u > 0.5 {
            out.push((i, Direction::Up));
        }
        if d > 0.5 {
            out.push((i, Direction::Down));
        }
    }
    out
}

fn check_pair(z_up: f64, z_down: f64) -> Result<()> {
    let in_unit = |z: f64| (-FACTOR_TOL..=1.0 + FACTOR_TOL).contains(&z);
    if !in_unit(z_up) || !in_unit(z_down) {
        return Err(Error::Domain(format!(
            "uncertainty factors must lie in [0, 1] (got up={z_up}, down={z_down})"
        )));
    }
    if z_up + z_down > 1.0 + FACTOR_TOL {
        return Err(Error::Domain(format!(
            "up and down factors sum to {} > 1",
            z_up + z_down
        )));
    }
    Ok(())
}

/// Demand of `load` under factors `(z_up, z_down)`, in MW.
pub fn realize_load(load: &LoadPoint, z_up: f64, z_down: f64) -> Result<f64> {
    check_pair(z_up, z_down)?;
    Ok(load.expected_mw + load.dev_up_mw * z_up - load.dev_down_mw * z_down)
}

/// Available wind at `farm` under factors `(z_up, z_down)`, in MW.
pub fn realize_wind(farm: &WindFarm, z_up: f64, z_down: f64) -> Result<f64> {
    check_pair(z_up, z_down)?;
    Ok(farm.expected_mw + farm.dev_up_mw * z_up - farm.dev_down_mw * z_down)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Load,
    Wind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BudgetViolation {
    FactorOutOfRange {
        component: Component,
        index: usize,
        direction: Direction,
        value: f64,
    },
    /// Both directions active on the same component beyond a total of 1.
    Pairing { component: Component, index: usize, sum: f64 },
    LoadBudget { total: f64, budget: f64 },
    WindBudget { total: f64, budget: f64 },
}

/// Every violated uncertainty-set constraint of `r` (empty iff feasible).
pub fn check_budget(r: &UncertaintyRealization, budgets: &Budgets) -> Result<Vec<BudgetViolation>> {
    if r.load_z_down.len() != r.load_z_up.len() {
        return Err(Error::DimensionMismatch {
            what: "load_z_down",
            expected: r.load_z_up.len(),
            got: r.load_z_down.len(),
        });
    }
    if r.wind_z_down.len() != r.wind_z_up.len() {
        return Err(Error::DimensionMismatch {
            what: "wind_z_down",
            expected: r.wind_z_up.len(),
            got: r.wind_z_down.len(),
        });
    }
    let mut out = Vec::new();
    let groups = [
        (Component::Load, &r.load_z_up, &r.load_z_down),
        (Component::Wind, &r.wind_z_up, &r.wind_z_down),
    ];
    for (component, up, down) in groups {
        for (index, (&u, &d)) in up.iter().zip(down.iter()).enumerate() {
            for (direction, value) in [(Direction::Up, u), (Direction::Down, d)] {
                if !(-FACTOR_TOL..=1.0 + FACTOR_TOL).contains(&value) {
                    out.push(BudgetViolation::FactorOutOfRange {
                        component,
                        index,
                        direction,
                        value,
                    });
                }
            }
            if u + d > 1.0 + FACTOR_TOL {
                out.push(BudgetViolation::Pairing {
                    component,
                    index,
                    sum: u + d,
                });
            }
        }
    }
    let load_total: f64 = r.load_z_up.iter().chain(&r.load_z_down).sum();
    if load_total > budgets.load_uncertainty_budget + FACTOR_TOL {
        out.push(BudgetViolation::LoadBudget {
            total: load_total,
            budget: budgets.load_uncertainty_budget,
        });
    }
    let wind_total: f64 = r.wind_z_up.iter().chain(&r.wind_z_down).sum();
    if wind_total > budgets.wind_uncertainty_budget + FACTOR_TOL {
        out.push(BudgetViolation::WindBudget {
            total: wind_total,
            budget: budgets.wind_uncertainty_budget,
        });
    }
    Ok(out)
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of binary realizations for `n` components under budget `u`:
/// `sum_{a <= u} C(n, a) * 2^a`.
pub fn extreme_count_one_side(n: usize, u: usize) -> u128 {
    (0..=u.min(n))
        .map(|a| binomial(n, a).saturating_mul(1u128 << a.min(127)))
        .fold(0u128, u128::saturating_add)
}

pub fn extreme_realization_count(case: &GridCase) -> u128 {
    let b = &case.budgets;
    extreme_count_one_side(case.loads.len(), b.load_budget_count())
        .saturating_mul(extreme_count_one_side(case.wind_farms.len(), b.wind_budget_count()))
}

/// Lazily enumerates every binary realization of the case's uncertainty
/// sets: nominal first, then by number of active factors, component
/// position (loads before farms), and up-before-down.
pub fn enumerate_extreme_realizations(case: &GridCase, cap: u128) -> Result<ExtremeRealizations> {
    let count = extreme_realization_count(case);
    if count > cap {
        return Err(Error::SizeCap {
            what: "extreme realizations",
            count,
            cap,
        });
    }
    let b = &case.budgets;
    Ok(ExtremeRealizations::new(
        case.loads.len(),
        case.wind_farms.len(),
        b.load_budget_count().min(case.loads.len()),
        b.wind_budget_count().min(case.wind_farms.len()),
        count,
    ))
}

#[derive(Debug, Clone)]
pub struct ExtremeRealizations {
    loads: usize,
    farms: usize,
    load_budget: usize,
    wind_budget: usize,
    /// Positions `< loads` are loads, the rest are farms.
    comb: Vec<usize>,
    mask: u64,
    done: bool,
    remaining: u128,
}

impl ExtremeRealizations {
    fn new(loads: usize, farms: usize, load_budget: usize, wind_budget: usize, count: u128) -> Self {
        Self {
            loads,
            farms,
            load_budget,
            wind_budget,
            comb: Vec::new(),
            mask: 0,
            done: false,
            remaining: count,
        }
    }

    fn comb_fits(&self) -> bool {
        let in_loads = self.comb.iter().filter(|&&p| p < self.loads).count();
        in_loads <= self.load_budget && self.comb.len() - in_loads <= self.wind_budget
    }

    /// Next combination in lexicographic order; grows `k` when exhausted.
    fn advance_comb(&mut self) {
        let n = self.loads + self.farms;
        let k = self.comb.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.comb[i] < n - k + i {
                self.comb[i] += 1;
                for t in i + 1..k {
                    self.comb[t] = self.comb[t - 1] + 1;
                }
                return;
            }
        }
        let next_k = k + 1;
        if next_k > n || next_k > self.load_budget + self.wind_budget {
            self.done = true;
        } else {
            self.comb = (0..next_k).collect();
        }
    }
}

impl Iterator for ExtremeRealizations {
    type Item = UncertaintyRealization;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.done {
                return None;
            }
            let k = self.comb.len();
            if self.comb_fits() && self.mask < (1u64 << k) {
                let mut r = UncertaintyRealization::nominal(self.loads, self.farms);
                for (t, &p) in self.comb.iter().enumerate() {
                    let down = (self.mask >> (k - 1 - t)) & 1 == 1;
                    let slot = if p < self.loads {
                        if down {
                            &mut r.load_z_down[p]
                        } else {
                            &mut r.load_z_up[p]
                        }
                    } else if down {
                        &mut r.wind_z_down[p - self.loads]
                    } else {
                        &mut r.wind_z_up[p - self.loads]
                    };
                    *slot = 1.0;
                }
                self.mask += 1;
                self.remaining = self.remaining.saturating_sub(1);
                return Some(r);
            }
            self.mask = 0;
            self.advance_comb();
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tests::{budgets, farm, load, three_bus};
    use alloc::collections::BTreeSet;

    fn l100() -> LoadPoint {
        load(1, 1, 100.0, 30.0, 30.0)
    }

    #[test]
    fn realize_load_extremes() {
        assert_eq!(realize_load(&l100(), 0.0, 0.0).unwrap(), 100.0);
        assert_eq!(realize_load(&l100(), 1.0, 0.0).unwrap(), 130.0);
        assert_eq!(realize_load(&l100(), 0.0, 1.0).unwrap(), 70.0);
    }

    #[test]
    fn realize_wind_study_farms() {
        assert_eq!(realize_wind(&farm(1, 1, 160.0, 32.0, 32.0), 0.0, 1.0).unwrap(), 128.0);
        assert_eq!(realize_wind(&farm(2, 13, 150.0, 30.0, 30.0), 0.0, 0.0).unwrap(), 150.0);
        assert_eq!(realize_wind(&farm(3, 23, 120.0, 24.0, 24.0), 1.0, 0.0).unwrap(), 144.0);
    }

    #[test]
    fn realize_rejects_bad_factors() {
        assert!(matches!(realize_load(&l100(), 1.2, 0.0), Err(Error::Domain(_))));
        assert!(matches!(realize_load(&l100(), 0.6, 0.6), Err(Error::Domain(_))));
        assert!(matches!(realize_wind(&farm(1, 1, 10.0, 1.0, 1.0), -0.1, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn check_budget_cases() {
        let b = budgets(0.0, 0.0, 5.0, 3.0);
        let r = UncertaintyRealization::nominal(7, 3);
        assert!(check_budget(&r, &b).unwrap().is_empty());

        let mut r = UncertaintyRealization::nominal(7, 3);
        r.load_z_up[2] = 1.0;
        r.load_z_down[2] = 1.0;
        let v = check_budget(&r, &b).unwrap();
        assert_eq!(
            v,
            [BudgetViolation::Pairing {
                component: Component::Load,
                index: 2,
                sum: 2.0
            }]
        );

        let mut r = UncertaintyRealization::nominal(7, 3);
        r.load_z_up[..6].fill(1.0);
        let v = check_budget(&r, &b).unwrap();
        assert_eq!(v, [BudgetViolation::LoadBudget { total: 6.0, budget: 5.0 }]);
    }

    #[test]
    fn check_budget_dimension_mismatch() {
        let mut r = UncertaintyRealization::nominal(2, 1);
        r.load_z_down.pop();
        assert!(matches!(
            check_budget(&r, &budgets(0.0, 0.0, 1.0, 1.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn case_with(loads: usize, ud: f64, farms: usize, uw: f64) -> GridCase {
        let mut c = three_bus(0.0, 0.0, ud, uw);
        c.loads = (0..loads).map(|i| load(i as u32 + 1, 2, 50.0, 10.0, 10.0)).collect();
        c.wind_farms = (0..farms).map(|k| farm(k as u32 + 1, 3, 30.0, 5.0, 5.0)).collect();
        c
    }

    /// Brute force over all 4^(n) assignments of {none, up, down} per component.
    fn brute_force_count(loads: usize, ud: usize, farms: usize, uw: usize) -> usize {
        let n = loads + farms;
        let mut count = 0;
        for code in 0..3usize.pow(n as u32) {
            let (mut c, mut in_l, mut in_w) = (code, 0, 0);
            for p in 0..n {
                if c % 3 != 0 {
                    if p < loads {
                        in_l += 1;
                    } else {
                        in_w += 1;
                    }
                }
                c /= 3;
            }
            if in_l <= ud && in_w <= uw {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn enumeration_small_cases() {
        let all: Vec<_> = enumerate_extreme_realizations(&case_with(1, 1.0, 0, 0.0), 100)
            .unwrap()
            .collect();
        assert_eq!(all.len(), 3);
        assert_eq!((all[1].load_z_up[0], all[1].load_z_down[0]), (1.0, 0.0));
        assert_eq!((all[2].load_z_up[0], all[2].load_z_down[0]), (0.0, 1.0));

        assert_eq!(enumerate_extreme_realizations(&case_with(2, 1.0, 0, 0.0), 100).unwrap().count(), 5);
        assert_eq!(brute_force_count(2, 1, 0, 0), 5);
        let c = case_with(2, 2.0, 1, 1.0);
        assert_eq!(extreme_realization_count(&c), 27);
        assert_eq!(enumerate_extreme_realizations(&c, 100).unwrap().count(), 27);
        assert_eq!(brute_force_count(2, 2, 1, 1), 27);
    }

    #[test]
    fn enumeration_matches_brute_force_and_is_feasible() {
        for loads in 0..4 {
            for farms in 0..3 {
                for ud in 0..4 {
                    for uw in 0..3 {
                        let c = case_with(loads, ud as f64, farms, uw as f64);
                        let all: Vec<_> = enumerate_extreme_realizations(&c, 1_000_000).unwrap().collect();
                        assert_eq!(all.len(), brute_force_count(loads, ud, farms, uw));
                        assert_eq!(all.len() as u128, extreme_realization_count(&c));
                        assert_eq!(all[0], UncertaintyRealization::nominal(loads, farms));
                        let distinct: BTreeSet<_> =
                            all.iter().map(|r| (r.active_loads(), r.active_farms())).collect();
                        assert_eq!(distinct.len(), all.len());
                        for r in &all {
                            assert!(r.is_binary());
                            assert!(check_budget(r, &c.budgets).unwrap().is_empty());
                        }
                        // non-decreasing number of active factors
                        assert!(all.windows(2).all(|w| w[0].active_count() <= w[1].active_count()));
                    }
                }
            }
        }
    }

    #[test]
    fn enumeration_refuses_over_cap() {
        let c = case_with(3, 3.0, 2, 2.0);
        let n = extreme_realization_count(&c);
        assert!(matches!(
            enumerate_extreme_realizations(&c, n - 1),
            Err(Error::SizeCap { count, .. }) if count == n
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn realize_is_affine(
                mw in 0.0f64..500.0, up in 0.0f64..60.0, down_share in 0.0f64..1.0,
                a in 0.0f64..0.5, b in 0.0f64..0.5, c in 0.0f64..0.5, d in 0.0f64..0.5,
            ) {
                // (a, b) + (c, d) keeps each pair-sum within 1
                let l = load(1, 1, mw, up, mw * down_share);
                let base = realize_load(&l, 0.0, 0.0).unwrap();
                let lhs = realize_load(&l, a, b).unwrap() + realize_load(&l, c, d).unwrap() - base;
                let rhs = realize_load(&l, a + c, b + d);
                if a + b + c + d <= 1.0 {
                    prop_assert!((lhs - rhs.unwrap()).abs() < 1e-9);
                }
                let w = farm(1, 1, mw, up, mw * down_share);
                if a + b <= 1.0 {
                    prop_assert!(realize_wind(&w, a, b).unwrap() >= -1e-9);
                }
            }
        }
    }
}
