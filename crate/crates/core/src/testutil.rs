//! Shared helpers for unit tests.

use alloc::vec::Vec;

use proptest::prelude::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dispatch::AttackPlan;
use crate::grid::GridCase;
use crate::random::{random_case, RandomCaseParams};
use crate::uncertainty::{Direction, UncertaintyRealization};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn case_from_seed(seed: u64) -> GridCase {
    random_case(&mut rng(seed), &RandomCaseParams::default())
}

pub fn arb_case() -> impl Strategy<Value = GridCase> {
    any::<u64>().prop_map(case_from_seed)
}

/// A random attack that fits the attack budget (unit costs assumed).
pub fn some_attack(case: &GridCase, seed: u64) -> AttackPlan {
    let mut r = rng(seed ^ 0xa77a);
    let n = case.element_count();
    let k = r.gen_range(0..=(case.budgets.attack_budget as usize).min(n));
    let chosen: Vec<usize> = sample(&mut r, n, k).into_vec();
    AttackPlan::from_elements(case, &chosen)
}

/// A random binary realization inside the case's uncertainty sets.
pub fn some_realization(case: &GridCase, seed: u64) -> UncertaintyRealization {
    let mut r = rng(seed ^ 0x2e41);
    let pick = |r: &mut ChaCha8Rng, n: usize, budget: usize| -> Vec<(usize, Direction)> {
        let k = r.gen_range(0..=budget.min(n));
        sample(r, n, k)
            .into_iter()
            .map(|i| (i, if r.gen_bool(0.5) { Direction::Up } else { Direction::Down }))
            .collect()
    };
    let loads = pick(&mut r, case.loads.len(), case.budgets.load_budget_count());
    let farms = pick(&mut r, case.wind_farms.len(), case.budgets.wind_budget_count());
    UncertaintyRealization::from_active(case.loads.len(), case.wind_farms.len(), &loads, &farms)
}
