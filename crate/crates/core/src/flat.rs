//! Single-class variant: batteries are either full or empty and any full
//! battery serves any request.

use crate::demand::EpochDemandDistribution;
use crate::error::{Error, Result};
use crate::exact::{check_capacity, prefer, BiOptions};
use crate::mdp::Action;
use crate::scenario::Scenario;

/// Flat model guard; the state space is only `M + 1` wide.
pub const FLAT_MAX_FLEET: usize = 2000;

/// Next full-battery count and the number of requests served.
pub fn flat_next_state(s: usize, a: usize, d: usize, fleet: usize) -> Result<(usize, usize)> {
    if s > fleet || a > fleet - s {
        return Err(Error::invalid(format!(
            "infeasible flat action {a} at state {s} with fleet {fleet}"
        )));
    }
    let served = s.min(d);
    Ok((s + a - served, served))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatValueTable {
    pub fleet: usize,
    pub horizon: usize,
    values: Vec<f64>,
    pub scenario_hash: String,
}

impl FlatValueTable {
    fn new(fleet: usize, horizon: usize, scenario_hash: String) -> Self {
        let mut values = vec![0.0; (fleet + 1) * horizon];
        for s in 0..=fleet {
            values[(horizon - 1) * (fleet + 1) + s] = s as f64;
        }
        FlatValueTable {
            fleet,
            horizon,
            values,
            scenario_hash,
        }
    }

    pub fn get(&self, t: usize, s: usize) -> f64 {
        self.values[(t - 1) * (self.fleet + 1) + s]
    }

    fn slice(&self, t: usize) -> &[f64] {
        &self.values[(t - 1) * (self.fleet + 1)..t * (self.fleet + 1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatPolicyTable {
    pub fleet: usize,
    pub horizon: usize,
    actions: Vec<usize>,
    pub scenario_hash: String,
}

impl FlatPolicyTable {
    pub fn get(&self, t: usize, s: usize) -> usize {
        self.actions[(t - 1) * (self.fleet + 1) + s]
    }

    pub(crate) fn from_raw(
        fleet: usize,
        horizon: usize,
        actions: Vec<usize>,
        scenario_hash: String,
    ) -> Result<Self> {
        if horizon < 2 || actions.len() != (fleet + 1) * (horizon - 1) {
            return Err(Error::invalid(
                "flat policy size does not match fleet and horizon",
            ));
        }
        for (i, &a) in actions.iter().enumerate() {
            let s = i % (fleet + 1);
            if a > fleet - s {
                return Err(Error::invalid(format!(
                    "infeasible flat action {a} at state {s}"
                )));
            }
        }
        Ok(FlatPolicyTable {
            fleet,
            horizon,
            actions,
            scenario_hash,
        })
    }
}

/// `sum_d p(d) [min(s, d) + V_{t+1}(s + a - min(s, d))]`.
pub fn flat_action_value(s: usize, a: usize, dist: &EpochDemandDistribution, next: &[f64]) -> f64 {
    let mut total = 0.0;
    for d in 0..s.min(dist.d_max() + 1) {
        total += dist.prob(d) * (d as f64 + next[s + a - d]);
    }
    total + dist.tail_or_zero(s) * (s as f64 + next[a])
}

fn guard(scenario: &Scenario) -> Result<()> {
    check_capacity(
        &scenario.model,
        &BiOptions {
            max_fleet: FLAT_MAX_FLEET,
        },
    )
}

pub fn flat_backward_induction(scenario: &Scenario) -> Result<(FlatValueTable, FlatPolicyTable)> {
    guard(scenario)?;
    let m = scenario.model.fleet_size;
    let n = scenario.model.horizon;
    let dists = scenario.schedule.aggregated()?;
    let mut values = FlatValueTable::new(m, n, scenario.hash());
    let mut actions = vec![0; (m + 1) * (n - 1)];
    for t in (1..n).rev() {
        let mut current = vec![0.0; m + 1];
        {
            let next = values.slice(t + 1);
            for s in 0..=m {
                let mut best = (0, flat_action_value(s, 0, &dists[t - 1], next));
                for a in 1..=m - s {
                    let q = flat_action_value(s, a, &dists[t - 1], next);
                    // Same tie rule as the classified solver: more charging wins.
                    if prefer(q, Action::new(0, a, 0), best.1, Action::new(0, best.0, 0)) {
                        best = (a, q);
                    }
                }
                current[s] = best.1;
                actions[(t - 1) * (m + 1) + s] = best.0;
            }
        }
        values.values[(t - 1) * (m + 1)..t * (m + 1)].copy_from_slice(&current);
    }
    let hash = values.scenario_hash.clone();
    Ok((
        values,
        FlatPolicyTable {
            fleet: m,
            horizon: n,
            actions,
            scenario_hash: hash,
        },
    ))
}

/// Exact value of a flat policy `(t, s) -> a`.
pub fn flat_evaluate<F>(scenario: &Scenario, policy: F) -> Result<FlatValueTable>
where
    F: Fn(usize, usize) -> usize,
{
    guard(scenario)?;
    let m = scenario.model.fleet_size;
    let n = scenario.model.horizon;
    let dists = scenario.schedule.aggregated()?;
    let mut values = FlatValueTable::new(m, n, scenario.hash());
    for t in (1..n).rev() {
        let mut current = vec![0.0; m + 1];
        let next = values.slice(t + 1);
        for (s, slot) in current.iter_mut().enumerate() {
            let a = policy(t, s);
            if a > m - s {
                return Err(Error::invalid(format!(
                    "infeasible flat action {a} at state {s}"
                )));
            }
            *slot = flat_action_value(s, a, &dists[t - 1], next);
        }
        values.values[(t - 1) * (m + 1)..t * (m + 1)].copy_from_slice(&current);
    }
    Ok(values)
}
