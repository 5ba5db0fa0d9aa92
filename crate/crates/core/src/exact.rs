//! Backward induction over the full state space and exact evaluation of
//! fixed policies.

use rayon::prelude::*;

use crate::demand::EpochDemandDistribution;
use crate::error::{Error, Result};
use crate::mdp::{
    feasible_actions_unchecked, for_each_branch, met_reward, terminal_reward, Action, ModelConfig,
    State, StateSpace,
};
use crate::scenario::Scenario;

/// Largest fleet the exact solver accepts unless told otherwise.
pub const DEFAULT_MAX_FLEET: usize = 24;

/// Relative slack under which two action values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// `V_t(s)` for `t = 1..=N` over the dense state space.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    fleet: usize,
    horizon: usize,
    values: Vec<f64>,
    pub scenario_hash: String,
    pub solver: String,
}

impl ValueTable {
    /// Table with `V_N` set to the terminal reward and zeros elsewhere.
    pub fn with_terminal(cfg: &ModelConfig, scenario_hash: &str, solver: &str) -> Self {
        let space = cfg.state_space();
        let mut values = vec![0.0; space.len() * cfg.horizon];
        let base = (cfg.horizon - 1) * space.len();
        for (i, s) in space.iter().enumerate() {
            values[base + i] = terminal_reward(s, cfg);
        }
        ValueTable {
            fleet: cfg.fleet_size,
            horizon: cfg.horizon,
            values,
            scenario_hash: scenario_hash.to_string(),
            solver: solver.to_string(),
        }
    }

    pub(crate) fn from_raw(
        fleet: usize,
        horizon: usize,
        values: Vec<f64>,
        scenario_hash: String,
        solver: String,
    ) -> Result<Self> {
        if values.len() != StateSpace::new(fleet).len() * horizon {
            return Err(Error::invalid(
                "value table size does not match fleet and horizon",
            ));
        }
        Ok(ValueTable {
            fleet,
            horizon,
            values,
            scenario_hash,
            solver,
        })
    }

    pub fn fleet(&self) -> usize {
        self.fleet
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn space(&self) -> StateSpace {
        StateSpace::new(self.fleet)
    }

    #[inline]
    pub fn get(&self, t: usize, s: State) -> f64 {
        self.slice(t)[self.space().index(s)]
    }

    pub fn set(&mut self, t: usize, s: State, v: f64) {
        let i = self.space().index(s);
        self.slice_mut(t)[i] = v;
    }

    /// Values at epoch `t` (1-based) indexed by [`StateSpace::index`].
    #[inline]
    pub fn slice(&self, t: usize) -> &[f64] {
        let n = self.space().len();
        &self.values[(t - 1) * n..t * n]
    }

    pub fn slice_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.space().len();
        &mut self.values[(t - 1) * n..t * n]
    }

    pub fn raw(&self) -> &[f64] {
        &self.values
    }
}

/// Decision rule `d_t(s)` for `t = 1..=N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    fleet: usize,
    horizon: usize,
    actions: Vec<Action>,
    pub scenario_hash: String,
    pub solver: String,
}

impl PolicyTable {
    pub fn new(cfg: &ModelConfig, scenario_hash: &str, solver: &str) -> Self {
        PolicyTable {
            fleet: cfg.fleet_size,
            horizon: cfg.horizon,
            actions: vec![Action::IDLE; cfg.state_space().len() * (cfg.horizon - 1)],
            scenario_hash: scenario_hash.to_string(),
            solver: solver.to_string(),
        }
    }

    pub(crate) fn from_raw(
        fleet: usize,
        horizon: usize,
        actions: Vec<Action>,
        scenario_hash: String,
        solver: String,
    ) -> Result<Self> {
        let space = StateSpace::new(fleet);
        if horizon < 2 || actions.len() != space.len() * (horizon - 1) {
            return Err(Error::invalid(
                "policy table size does not match fleet and horizon",
            ));
        }
        let table = PolicyTable {
            fleet,
            horizon,
            actions,
            scenario_hash,
            solver,
        };
        for t in 1..horizon {
            for s in space.iter() {
                table.get(t, s).check(s, fleet)?;
            }
        }
        Ok(table)
    }

    pub fn fleet(&self) -> usize {
        self.fleet
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn space(&self) -> StateSpace {
        StateSpace::new(self.fleet)
    }

    #[inline]
    pub fn get(&self, t: usize, s: State) -> Action {
        let n = self.space().len();
        self.actions[(t - 1) * n + self.space().index(s)]
    }

    pub fn set(&mut self, t: usize, s: State, a: Action) {
        let n = self.space().len();
        let i = (t - 1) * n + self.space().index(s);
        self.actions[i] = a;
    }

    pub fn raw(&self) -> &[Action] {
        &self.actions
    }
}

/// A Markov decision rule. Implementations must return a feasible action.
pub trait Policy: Sync {
    fn action(&self, t: usize, s: State) -> Action;
}

impl Policy for PolicyTable {
    fn action(&self, t: usize, s: State) -> Action {
        self.get(t, s)
    }
}

/// Fully charge every empty battery, every epoch.
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkPolicy {
    pub fleet: usize,
}

impl Policy for BenchmarkPolicy {
    fn action(&self, _t: usize, s: State) -> Action {
        benchmark_action_for(s, self.fleet)
    }
}

/// Never recharge.
#[derive(Debug, Clone, Copy)]
pub struct IdlePolicy;

impl Policy for IdlePolicy {
    fn action(&self, _t: usize, _s: State) -> Action {
        Action::IDLE
    }
}

/// Adapts a closure `(t, s) -> Action`.
pub struct FnPolicy<F>(pub F);

impl<F> Policy for FnPolicy<F>
where
    F: Fn(usize, State) -> Action + Sync,
{
    fn action(&self, t: usize, s: State) -> Action {
        (self.0)(t, s)
    }
}

pub fn benchmark_action(s: State, cfg: &ModelConfig) -> Result<Action> {
    s.check(cfg.fleet_size)?;
    Ok(benchmark_action_for(s, cfg.fleet_size))
}

fn benchmark_action_for(s: State, fleet: usize) -> Action {
    Action::new(0, s.empty(fleet), 0)
}

/// `r_t(s, a) + sum_j p(j | s, a) V_{t+1}(j)` with `next` indexed by `space`.
#[inline]
pub fn action_value(
    space: StateSpace,
    next: &[f64],
    s: State,
    a: Action,
    dist1: &EpochDemandDistribution,
    dist2: &EpochDemandDistribution,
    cfg: &ModelConfig,
) -> f64 {
    let mut total = 0.0;
    for_each_branch(s, a, dist1, dist2, |b| {
        let r = met_reward(b.met_c1_lvl1, b.met_c1_lvl2, b.met_c2_lvl2, cfg);
        total += b.prob * (r + next[space.index(b.next_state)]);
    });
    total
}

/// True when `candidate` should replace `incumbent` under the tie rule.
#[inline]
pub fn prefer(candidate_value: f64, candidate: Action, best_value: f64, best: Action) -> bool {
    let slack = TIE_TOLERANCE * best_value.abs().max(1.0);
    if candidate_value > best_value + slack {
        true
    } else if candidate_value >= best_value - slack {
        candidate.preference_key() > best.preference_key()
    } else {
        false
    }
}

/// Maximising action and its value over a candidate list.
pub fn argmax_action<I>(candidates: I) -> Option<(Action, f64)>
where
    I: IntoIterator<Item = (Action, f64)>,
{
    let mut best: Option<(Action, f64)> = None;
    for (a, v) in candidates {
        best = match best {
            Some((ba, bv)) if !prefer(v, a, bv, ba) => Some((ba, bv)),
            _ => Some((a, v)),
        };
    }
    best
}

#[derive(Debug, Clone, Copy)]
pub struct BiOptions {
    pub max_fleet: usize,
}

impl Default for BiOptions {
    fn default() -> Self {
        BiOptions {
            max_fleet: DEFAULT_MAX_FLEET,
        }
    }
}

pub fn check_capacity(cfg: &ModelConfig, opts: &BiOptions) -> Result<()> {
    if cfg.fleet_size > opts.max_fleet {
        return Err(Error::Capacity {
            fleet: cfg.fleet_size,
            limit: opts.max_fleet,
        });
    }
    Ok(())
}

pub fn backward_induction(scenario: &Scenario) -> Result<(ValueTable, PolicyTable)> {
    backward_induction_with(scenario, &BiOptions::default())
}

pub fn backward_induction_with(
    scenario: &Scenario,
    opts: &BiOptions,
) -> Result<(ValueTable, PolicyTable)> {
    let cfg = &scenario.model;
    check_capacity(cfg, opts)?;
    let hash = scenario.hash();
    let space = cfg.state_space();
    let mut values = ValueTable::with_terminal(cfg, &hash, "bi");
    let mut policy = PolicyTable::new(cfg, &hash, "bi");
    let states: Vec<State> = space.iter().collect();

    for t in (1..cfg.horizon).rev() {
        let (dist1, dist2) = scenario.schedule.pair(t);
        let next = values.slice(t + 1);
        let solved: Vec<(Action, f64)> = states
            .par_iter()
            .map(|&s| {
                let candidates = feasible_actions_unchecked(s, cfg.fleet_size)
                    .into_iter()
                    .map(|a| (a, action_value(space, next, s, a, dist1, dist2, cfg)));
                argmax_action(candidates).expect("every state admits the idle action")
            })
            .collect();
        let current = values.slice_mut(t);
        for (i, &(_, v)) in solved.iter().enumerate() {
            current[i] = v;
        }
        for (&s, &(a, _)) in states.iter().zip(&solved) {
            policy.set(t, s, a);
        }
    }
    Ok((values, policy))
}

/// Exact expected total reward of a fixed Markov policy from every `(t, s)`.
pub fn evaluate_fixed_policy<P: Policy + ?Sized>(
    scenario: &Scenario,
    policy: &P,
) -> Result<ValueTable> {
    evaluate_fixed_policy_with(scenario, policy, &BiOptions::default())
}

pub fn evaluate_fixed_policy_with<P: Policy + ?Sized>(
    scenario: &Scenario,
    policy: &P,
    opts: &BiOptions,
) -> Result<ValueTable> {
    let cfg = &scenario.model;
    check_capacity(cfg, opts)?;
    let space = cfg.state_space();
    let mut values = ValueTable::with_terminal(cfg, &scenario.hash(), "evaluate");
    let states: Vec<State> = space.iter().collect();
    for t in (1..cfg.horizon).rev() {
        let (dist1, dist2) = scenario.schedule.pair(t);
        let next = values.slice(t + 1);
        let solved: Vec<Result<f64>> = states
            .par_iter()
            .map(|&s| {
                let a = policy.action(t, s);
                a.check(s, cfg.fleet_size)?;
                Ok(action_value(space, next, s, a, dist1, dist2, cfg))
            })
            .collect();
        let current = values.slice_mut(t);
        for (i, v) in solved.into_iter().enumerate() {
            current[i] = v?;
        }
    }
    Ok(values)
}
