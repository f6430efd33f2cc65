//! Seeded generation of small random instances for oracle checks and
//! property tests.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::grid::{Branch, Budgets, Bus, Generator, GridCase, LoadPoint, WindFarm};

/// Size ranges (inclusive) for [`random_case`].
#[derive(Debug, Clone)]
pub struct RandomCaseParams {
    pub buses: (usize, usize),
    pub branches: (usize, usize),
    pub generators: (usize, usize),
    pub wind_farms: (usize, usize),
    pub loads: (usize, usize),
    pub max_defense_budget: u32,
    pub max_attack_budget: u32,
    pub max_load_budget: u32,
    pub max_wind_budget: u32,
}

impl Default for RandomCaseParams {
    fn default() -> Self {
        Self {
            buses: (3, 6),
            branches: (3, 8),
            generators: (1, 3),
            wind_farms: (0, 2),
            loads: (1, 3),
            max_defense_budget: 2,
            max_attack_budget: 2,
            max_load_budget: 2,
            max_wind_budget: 2,
        }
    }
}

fn pick<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (usize, usize)) -> usize {
    rng.gen_range(lo..=hi)
}

/// A connected random network with unit defense and attack costs.
///
/// The first `buses - 1` branches form a random spanning tree; the rest join
/// random distinct bus pairs (parallel branches allowed). Capacities are
/// whole MW so values stay readable.
pub fn random_case<R: Rng + ?Sized>(rng: &mut R, p: &RandomCaseParams) -> GridCase {
    let nb = pick(rng, p.buses).max(1);
    let nl = pick(rng, p.branches).max(nb - 1);
    let ng = pick(rng, p.generators);
    let nk = pick(rng, p.wind_farms);
    let nd = pick(rng, p.loads).max(1);

    let mut order: Vec<u32> = (1..=nb as u32).collect();
    order.shuffle(rng);
    let mut pairs: Vec<(u32, u32)> = (1..nb).map(|i| (order[rng.gen_range(0..i)], order[i])).collect();
    while pairs.len() < nl && nb >= 2 {
        let a = rng.gen_range(1..=nb as u32);
        let b = rng.gen_range(1..=nb as u32);
        if a != b {
            pairs.push((a, b));
        }
    }
    let bus_of = |rng: &mut R| rng.gen_range(1..=nb as u32);

    let loads: Vec<LoadPoint> = (1..=nd as u32)
        .map(|id| {
            let mw = f64::from(rng.gen_range(20u32..=100));
            let dev = f64::from(rng.gen_range(5u32..=30));
            LoadPoint {
                id,
                bus: bus_of(rng),
                expected_mw: mw,
                dev_up_mw: dev,
                dev_down_mw: dev.min(mw),
            }
        })
        .collect();
    let total_load: f64 = loads.iter().map(|l| l.expected_mw).sum();
    let generators = (1..=ng as u32)
        .map(|id| Generator {
            id,
            bus: bus_of(rng),
            p_max: libm::round(total_load * rng.gen_range(0.4..1.2)),
            defense_cost: 1.0,
            attack_cost: 1.0,
        })
        .collect();
    let wind_farms = (1..=nk as u32)
        .map(|id| {
            let mw = f64::from(rng.gen_range(10u32..=60));
            let dev = libm::round(mw * 0.2);
            WindFarm {
                id,
                bus: bus_of(rng),
                expected_mw: mw,
                dev_up_mw: dev,
                dev_down_mw: dev,
            }
        })
        .collect();
    let branches = pairs
        .into_iter()
        .enumerate()
        .map(|(l, (f, t))| Branch {
            id: l as u32 + 1,
            from_bus: f,
            to_bus: t,
            reactance_x: f64::from(rng.gen_range(5u32..=40)) / 100.0,
            flow_limit: f64::from(rng.gen_range(20u32..=120)),
            defense_cost: 1.0,
            attack_cost: 1.0,
        })
        .collect();
    let budgets = Budgets {
        defense_budget: f64::from(rng.gen_range(0..=p.max_defense_budget)),
        attack_budget: f64::from(rng.gen_range(0..=p.max_attack_budget)),
        load_uncertainty_budget: f64::from(rng.gen_range(0..=p.max_load_budget)),
        wind_uncertainty_budget: f64::from(rng.gen_range(0..=p.max_wind_budget)),
    };
    GridCase {
        base_mva: 100.0,
        buses: (1..=nb as u32).map(|id| Bus { id, name: None }).collect(),
        branches,
        generators,
        wind_farms,
        loads,
        budgets,
    }
}
