//! Brute-force oracles and fixture helpers shared by the integration tests
//! and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use swapdp_core::mdp::feasible_actions;
use swapdp_core::{
    Action, EpochDemandDistribution, ModelConfig, Scenario, ScenarioConfig, State, StateSpace,
};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// The class-1-heavy desk scenario at fleet size `m`.
pub fn desk(m: usize) -> Scenario {
    let mut cfg = ScenarioConfig::from_json(&read_fixture("desk_config.json")).unwrap();
    cfg.fleet_size = m;
    Scenario::build(read_fixture("desk_hospitals.csv").as_bytes(), cfg).unwrap()
}

pub fn from_rates(m: usize, rates1: &[f64], rates2: &[f64], rho21: f64) -> Scenario {
    let mut cfg = ScenarioConfig::new(m);
    cfg.horizon_epochs = Some(rates1.len() + 1);
    cfg.rho21 = rho21;
    Scenario::from_rates(cfg, rates1, rates2).unwrap()
}

/// Met counts of one epoch: class 1 by level 1, class 1 by level 2, class 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Met {
    pub c1_lvl1: usize,
    pub c1_lvl2: usize,
    pub c2: usize,
}

/// Serves requests one at a time. Batteries picked for the level 1 to 2
/// upgrade sit on the charger and are unavailable; class 2 draws level-2
/// stock first; class 1 uses level 1, then any level-2 left over, which comes
/// back at level 1.
pub fn oracle_step(s: State, a: Action, d1: usize, d2: usize) -> (State, Met) {
    let mut lvl1 = s.s1 - a.a12;
    let mut lvl2 = s.s2;
    let mut back_lvl1 = 0;
    let mut met = Met::default();
    for _ in 0..d2 {
        if lvl2 > 0 {
            lvl2 -= 1;
            met.c2 += 1;
        }
    }
    for _ in 0..d1 {
        if lvl1 > 0 {
            lvl1 -= 1;
            met.c1_lvl1 += 1;
        } else if lvl2 > 0 {
            lvl2 -= 1;
            back_lvl1 += 1;
            met.c1_lvl2 += 1;
        }
    }
    let next = State::new(lvl1 + back_lvl1 + a.a01, lvl2 + a.a02 + a.a12);
    (next, met)
}

/// Per action: expected reward and `(next index, probability)` pairs.
type StateModel = Vec<(f64, Vec<(usize, f64)>)>;
/// Indexed by epoch, then state.
type EpochModels = Vec<Vec<StateModel>>;

pub fn oracle_reward(met: Met, cfg: &ModelConfig) -> f64 {
    cfg.rho11 * met.c1_lvl1 as f64 + cfg.rho21 * met.c1_lvl2 as f64 + cfg.rho22 * met.c2 as f64
}

/// Enumerates every demand pair in the truncated support.
pub fn oracle_transition(
    s: State,
    a: Action,
    dist1: &EpochDemandDistribution,
    dist2: &EpochDemandDistribution,
    cfg: &ModelConfig,
) -> (BTreeMap<State, f64>, f64) {
    let mut out = BTreeMap::new();
    let mut reward = 0.0;
    for (d1, &p1) in dist1.pmf_slice().iter().enumerate() {
        for (d2, &p2) in dist2.pmf_slice().iter().enumerate() {
            let (next, met) = oracle_step(s, a, d1, d2);
            *out.entry(next).or_insert(0.0) += p1 * p2;
            reward += p1 * p2 * oracle_reward(met, cfg);
        }
    }
    (out, reward)
}

/// Per-state best `V_1` over every deterministic Markov policy, each
/// evaluated with oracle transitions.
pub fn best_over_all_policies(scenario: &Scenario) -> Vec<f64> {
    let cfg = &scenario.model;
    let space = StateSpace::new(cfg.fleet_size);
    let states: Vec<State> = space.iter().collect();
    let n = cfg.horizon;
    let terminal: Vec<f64> = states
        .iter()
        .map(|s| cfg.rho11 * s.s1 as f64 + cfg.rho22 * s.s2 as f64)
        .collect();

    let models: EpochModels = (1..n)
        .map(|t| {
            let (d1, d2) = scenario.schedule.pair(t);
            states
                .iter()
                .map(|&s| {
                    feasible_actions(s, cfg)
                        .unwrap()
                        .into_iter()
                        .map(|a| {
                            let (dist, r) = oracle_transition(s, a, d1, d2, cfg);
                            (
                                r,
                                dist.into_iter().map(|(j, p)| (space.index(j), p)).collect(),
                            )
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut best = vec![f64::NEG_INFINITY; states.len()];
    enumerate(&models, n - 1, terminal, &mut best);
    best
}

fn backup(model: &[StateModel], choice: &[usize], next: &[f64]) -> Vec<f64> {
    model
        .iter()
        .zip(choice)
        .map(|(actions, &k)| {
            let (r, dist) = &actions[k];
            r + dist.iter().map(|&(j, p)| p * next[j]).sum::<f64>()
        })
        .collect()
}

fn enumerate(models: &[Vec<StateModel>], t: usize, next: Vec<f64>, best: &mut [f64]) {
    let model = &models[t - 1];
    let radix: Vec<usize> = model.iter().map(|a| a.len()).collect();
    let mut choice = vec![0; radix.len()];
    loop {
        let v = backup(model, &choice, &next);
        if t == 1 {
            for (b, x) in best.iter_mut().zip(&v) {
                *b = b.max(*x);
            }
        } else {
            enumerate(models, t - 1, v, best);
        }
        // mixed-radix increment
        let mut i = 0;
        loop {
            if i == choice.len() {
                return;
            }
            choice[i] += 1;
            if choice[i] < radix[i] {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Flat-model counterpart of [`best_over_all_policies`], indexed by the
/// number of full batteries.
pub fn flat_best_over_all_policies(scenario: &Scenario) -> Vec<f64> {
    let m = scenario.model.fleet_size;
    let n = scenario.model.horizon;
    let eps = scenario.schedule.truncation_eps();
    let models: EpochModels = (1..n)
        .map(|t| {
            let (d1, d2) = scenario.schedule.pair(t);
            let dist = EpochDemandDistribution::poisson(d1.lambda() + d2.lambda(), eps).unwrap();
            (0..=m)
                .map(|s| {
                    (0..=m - s)
                        .map(|a| {
                            let mut next = BTreeMap::new();
                            let mut r = 0.0;
                            for (d, &p) in dist.pmf_slice().iter().enumerate() {
                                let served = s.min(d);
                                r += p * served as f64;
                                *next.entry(s - served + a).or_insert(0.0) += p;
                            }
                            (r, next.into_iter().collect())
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let terminal: Vec<f64> = (0..=m).map(|s| s as f64).collect();
    let mut best = vec![f64::NEG_INFINITY; m + 1];
    enumerate(&models, n - 1, terminal, &mut best);
    best
}
