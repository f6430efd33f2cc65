//! The modified IEEE RTS-79 study case.
//!
//! Topology, reactances, and continuous ratings follow the 1979 RTS tables.
//! Of the 32 original generating units, units 3, 14 and 31 are removed and
//! wind farms take their places at buses 1, 13 and 23. The remaining 29
//! units are numbered 1..=29 in original table order. Loads are the RTS
//! peak-hour bus loads (2850 MW total).

use alloc::vec::Vec;

use crate::grid::{Branch, Budgets, Bus, Generator, GridCase, LoadPoint, WindFarm};

/// (from, to, reactance p.u., rating MW)
const BRANCHES: [(u32, u32, f64, f64); 38] = [
    (1, 2, 0.0139, 175.0),
    (1, 3, 0.2112, 175.0),
    (1, 5, 0.0845, 175.0),
    (2, 4, 0.1267, 175.0),
    (2, 6, 0.1920, 175.0),
    (3, 9, 0.1190, 175.0),
    (3, 24, 0.0839, 400.0),
    (4, 9, 0.1037, 175.0),
    (5, 10, 0.0883, 175.0),
    (6, 10, 0.0605, 175.0),
    (7, 8, 0.0614, 175.0),
    (8, 9, 0.1651, 175.0),
    (8, 10, 0.1651, 175.0),
    (9, 11, 0.0839, 400.0),
    (9, 12, 0.0839, 400.0),
    (10, 11, 0.0839, 400.0),
    (10, 12, 0.0839, 400.0),
    (11, 13, 0.0476, 500.0),
    (11, 14, 0.0418, 500.0),
    (12, 13, 0.0476, 500.0),
    (12, 23, 0.0966, 500.0),
    (13, 23, 0.0865, 500.0),
    (14, 16, 0.0389, 500.0),
    (15, 16, 0.0173, 500.0),
    (15, 21, 0.0490, 500.0),
    (15, 21, 0.0490, 500.0),
    (15, 24, 0.0519, 500.0),
    (16, 17, 0.0259, 500.0),
    (16, 19, 0.0231, 500.0),
    (17, 18, 0.0144, 500.0),
    (17, 22, 0.1053, 500.0),
    (18, 21, 0.0259, 500.0),
    (18, 21, 0.0259, 500.0),
    (19, 20, 0.0396, 500.0),
    (19, 20, 0.0396, 500.0),
    (20, 23, 0.0216, 500.0),
    (20, 23, 0.0216, 500.0),
    (21, 22, 0.0678, 500.0),
];

/// The 32 original units as (bus, MW), in table order.
const ORIGINAL_UNITS: [(u32, f64); 32] = [
    (1, 20.0),
    (1, 20.0),
    (1, 76.0),
    (1, 76.0),
    (2, 20.0),
    (2, 20.0),
    (2, 76.0),
    (2, 76.0),
    (7, 100.0),
    (7, 100.0),
    (7, 100.0),
    (13, 197.0),
    (13, 197.0),
    (13, 197.0),
    (15, 12.0),
    (15, 12.0),
    (15, 12.0),
    (15, 12.0),
    (15, 12.0),
    (15, 155.0),
    (16, 155.0),
    (18, 400.0),
    (21, 400.0),
    (22, 50.0),
    (22, 50.0),
    (22, 50.0),
    (22, 50.0),
    (22, 50.0),
    (22, 50.0),
    (23, 155.0),
    (23, 155.0),
    (23, 350.0),
];

/// 1-based original unit numbers taken out of service.
pub const REMOVED_UNITS: [usize; 3] = [3, 14, 31];

/// Peak-hour bus loads (bus, MW).
const LOADS: [(u32, f64); 17] = [
    (1, 108.0),
    (2, 97.0),
    (3, 180.0),
    (4, 74.0),
    (5, 71.0),
    (6, 136.0),
    (7, 125.0),
    (8, 171.0),
    (9, 175.0),
    (10, 195.0),
    (13, 265.0),
    (14, 194.0),
    (15, 317.0),
    (16, 100.0),
    (18, 333.0),
    (19, 181.0),
    (20, 128.0),
];

/// (bus, expected MW); deviations are 20 % of expected in both directions.
const WIND: [(u32, f64); 3] = [(1, 160.0), (13, 150.0), (23, 120.0)];

pub const LOAD_DEVIATION_MW: f64 = 30.0;
pub const WIND_DEVIATION_SHARE: f64 = 0.2;

/// Base-case budgets: defense 3, attack 3, load uncertainty 5, wind 3.
pub const BASE_BUDGETS: Budgets = Budgets {
    defense_budget: 3.0,
    attack_budget: 3.0,
    load_uncertainty_budget: 5.0,
    wind_uncertainty_budget: 3.0,
};

pub fn make_modified_rts79() -> GridCase {
    let buses = (1..=24).map(|id| Bus { id, name: None }).collect();
    let branches = BRANCHES
        .iter()
        .zip(1u32..)
        .map(|(&(from_bus, to_bus, reactance_x, flow_limit), id)| Branch {
            id,
            from_bus,
            to_bus,
            reactance_x,
            flow_limit,
            defense_cost: 1.0,
            attack_cost: 1.0,
        })
        .collect();
    let generators: Vec<Generator> = ORIGINAL_UNITS
        .iter()
        .enumerate()
        .filter(|(i, _)| !REMOVED_UNITS.contains(&(i + 1)))
        .zip(1u32..)
        .map(|((_, &(bus, p_max)), id)| Generator {
            id,
            bus,
            p_max,
            defense_cost: 1.0,
            attack_cost: 1.0,
        })
        .collect();
    let wind_farms = WIND
        .iter()
        .zip(1u32..)
        .map(|(&(bus, mw), id)| WindFarm {
            id,
            bus,
            expected_mw: mw,
            dev_up_mw: mw * WIND_DEVIATION_SHARE,
            dev_down_mw: mw * WIND_DEVIATION_SHARE,
        })
        .collect();
    let loads = LOADS
        .iter()
        .zip(1u32..)
        .map(|(&(bus, mw), id)| LoadPoint {
            id,
            bus,
            expected_mw: mw,
            dev_up_mw: LOAD_DEVIATION_MW,
            dev_down_mw: LOAD_DEVIATION_MW,
        })
        .collect();
    GridCase {
        base_mva: 100.0,
        buses,
        branches,
        generators,
        wind_farms,
        loads,
        budgets: BASE_BUDGETS,
    }
}
