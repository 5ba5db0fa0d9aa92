//! Lookup-table value learning with descending epsilon-greedy exploration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::demand::DemandSchedule;
use crate::error::{Error, Result};
use crate::exact::{action_value, argmax_action, BiOptions, PolicyTable, ValueTable};
use crate::mdp::{
    feasible_actions_unchecked, next_state_unchecked, realized_reward, Action, Demand, ModelConfig,
    State,
};
use crate::scenario::Scenario;
use crate::stepsize::{smooth, StepsizeRule, StepsizeState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsilonSchedule {
    /// `1 / n`.
    Reciprocal,
    Constant {
        value: f64,
    },
}

impl EpsilonSchedule {
    pub fn at(&self, n: u64) -> f64 {
        epsilon_at(n, self)
    }
}

pub fn epsilon_at(n: u64, schedule: &EpsilonSchedule) -> f64 {
    match *schedule {
        EpsilonSchedule::Reciprocal => 1.0 / n.max(1) as f64,
        EpsilonSchedule::Constant { value } => value,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateRule {
    /// The scenario's own starting state.
    Scenario,
    Fixed {
        state: [usize; 2],
    },
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RLConfig {
    #[serde(default = "default_tau1")]
    pub tau1: u64,
    #[serde(default = "default_tau2")]
    pub tau2: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: EpsilonSchedule,
    #[serde(default)]
    pub stepsize: StepsizeRule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_initial_state")]
    pub initial_state: InitialStateRule,
    /// Iterations between trace samples; `tau1 / 1000` when zero.
    #[serde(default)]
    pub trace_every: u64,
    /// Greedy extraction scores actions exactly up to this fleet size and by
    /// `tau2` sampling above it.
    #[serde(default = "default_exact_greedy_max_fleet")]
    pub exact_greedy_max_fleet: usize,
}

fn default_tau1() -> u64 {
    200_000
}
fn default_tau2() -> usize {
    30
}
fn default_epsilon() -> EpsilonSchedule {
    EpsilonSchedule::Reciprocal
}
fn default_initial_state() -> InitialStateRule {
    InitialStateRule::Scenario
}
fn default_exact_greedy_max_fleet() -> usize {
    24
}

impl Default for RLConfig {
    fn default() -> Self {
        RLConfig {
            tau1: default_tau1(),
            tau2: default_tau2(),
            epsilon: default_epsilon(),
            stepsize: StepsizeRule::default(),
            seed: 0,
            initial_state: default_initial_state(),
            trace_every: 0,
            exact_greedy_max_fleet: default_exact_greedy_max_fleet(),
        }
    }
}

impl RLConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RLConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau1 == 0 || self.tau2 == 0 {
            return Err(Error::invalid("tau1 and tau2 must be at least 1"));
        }
        if let EpsilonSchedule::Constant { value } = self.epsilon {
            if !(value > 0.0 && value <= 1.0) {
                return Err(Error::invalid("constant epsilon must lie in (0, 1]"));
            }
        }
        self.stepsize.validate()
    }

    pub fn trace_interval(&self) -> u64 {
        if self.trace_every > 0 {
            self.trace_every
        } else {
            (self.tau1 / 1000).max(1)
        }
    }
}

/// Learned values plus the bookkeeping of a training run.
#[derive(Debug, Clone)]
pub struct ApproxValueTable {
    pub values: ValueTable,
    /// Update counts per `(t, s)`, same layout as `values`.
    pub visits: Vec<u64>,
    pub stepsize: Vec<StepsizeState>,
    /// `(iteration, V_1(s_1))` samples.
    pub trace: Vec<(u64, f64)>,
    pub explore_decisions: u64,
    pub total_decisions: u64,
    pub reference_state: State,
}

impl ApproxValueTable {
    pub fn new(cfg: &ModelConfig, scenario_hash: &str, reference_state: State) -> Self {
        let values = ValueTable::with_terminal(cfg, scenario_hash, "rl");
        let n = values.raw().len();
        ApproxValueTable {
            values,
            visits: vec![0; n],
            stepsize: vec![StepsizeState::default(); n],
            trace: Vec::new(),
            explore_decisions: 0,
            total_decisions: 0,
            reference_state,
        }
    }

    fn slot(&self, t: usize, s: State) -> usize {
        let space = self.values.space();
        (t - 1) * space.len() + space.index(s)
    }

    pub fn value(&self, t: usize, s: State) -> f64 {
        self.values.get(t, s)
    }

    pub fn visits(&self, t: usize, s: State) -> u64 {
        self.visits[self.slot(t, s)]
    }

    fn trailing_window(&self, fraction: f64) -> Option<(f64, Vec<f64>)> {
        let (last_iter, last) = *self.trace.last()?;
        let from = last_iter as f64 * (1.0 - fraction);
        let window = self
            .trace
            .iter()
            .filter(|(i, _)| *i as f64 >= from)
            .map(|&(_, v)| v)
            .collect();
        Some((last, window))
    }

    /// `|last - first| / |last|` over the trace samples in the final
    /// `fraction` of iterations.
    pub fn trailing_relative_change(&self, fraction: f64) -> Option<f64> {
        let (last, window) = self.trailing_window(fraction)?;
        Some(relative(window[0], last))
    }

    /// `(max - min) / |last|` over the same window.
    pub fn trailing_relative_range(&self, fraction: f64) -> Option<f64> {
        let (last, window) = self.trailing_window(fraction)?;
        let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some(if hi == lo {
            0.0
        } else {
            (hi - lo) / last.abs()
        })
    }
}

fn relative(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (b - a).abs() / b.abs()
    }
}

/// How the greedy step scores candidate actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scoring {
    /// Average over this many sampled demand pairs.
    Sampled(usize),
    /// Exact expectation under the truncated demand law.
    Exact,
}

fn sample_score(
    s: State,
    a: Action,
    demands: &[Demand],
    next: &ValueTable,
    t: usize,
    cfg: &ModelConfig,
) -> f64 {
    let mut total = 0.0;
    for &d in demands {
        let out = next_state_unchecked(s, a, d);
        total += realized_reward(s, a, &out, cfg) + next.get(t + 1, out.next_state);
    }
    total / demands.len() as f64
}

/// Greedy action at `(t, s)` against `values` at `t + 1`, with its score.
pub fn select_action<R: Rng + ?Sized>(
    values: &ValueTable,
    s: State,
    t: usize,
    schedule: &DemandSchedule,
    cfg: &ModelConfig,
    tau2: usize,
    rng: &mut R,
) -> (Action, f64) {
    let demands: Vec<Demand> = (0..tau2.max(1))
        .map(|_| schedule.sample_pair(t, rng))
        .collect();
    let candidates = feasible_actions_unchecked(s, cfg.fleet_size)
        .into_iter()
        .map(|a| (a, sample_score(s, a, &demands, values, t, cfg)));
    argmax_action(candidates).expect("idle action always feasible")
}

/// Greedy action scored by exact expectation.
pub fn select_action_exact(
    values: &ValueTable,
    s: State,
    t: usize,
    schedule: &DemandSchedule,
    cfg: &ModelConfig,
) -> (Action, f64) {
    let (d1, d2) = schedule.pair(t);
    let space = values.space();
    let next = values.slice(t + 1);
    let candidates = feasible_actions_unchecked(s, cfg.fleet_size)
        .into_iter()
        .map(|a| (a, action_value(space, next, s, a, d1, d2, cfg)));
    argmax_action(candidates).expect("idle action always feasible")
}

/// Blends `observation` into `V(t, s)` using the entry's stepsize stream.
pub fn smooth_update(
    table: &mut ApproxValueTable,
    t: usize,
    s: State,
    observation: f64,
    rule: &StepsizeRule,
) -> f64 {
    let slot = table.slot(t, s);
    let previous = table.values.get(t, s);
    let alpha = table.stepsize[slot].next(rule, previous, observation);
    let z = smooth(previous, observation, alpha);
    table.values.set(t, s, z);
    table.visits[slot] += 1;
    z
}

fn initial_state<R: Rng + ?Sized>(
    rule: &InitialStateRule,
    scenario: &Scenario,
    rng: &mut R,
) -> State {
    match *rule {
        InitialStateRule::Scenario => scenario.initial_state,
        InitialStateRule::Fixed { state: [s1, s2] } => State::new(s1, s2),
        InitialStateRule::UniformRandom => {
            let space = scenario.model.state_space();
            space.state(rng.gen_range(0..space.len()))
        }
    }
}

pub fn train(scenario: &Scenario, config: &RLConfig) -> Result<ApproxValueTable> {
    config.validate()?;
    if let InitialStateRule::Fixed { state: [s1, s2] } = config.initial_state {
        State::new(s1, s2).check(scenario.model.fleet_size)?;
    }
    let cfg = &scenario.model;
    let schedule = &scenario.schedule;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut table = ApproxValueTable::new(cfg, &scenario.hash(), scenario.initial_state);
    let every = config.trace_interval();
    let mut demands: Vec<Demand> = Vec::with_capacity(config.tau2);

    for n in 1..=config.tau1 {
        let eps = epsilon_at(n, &config.epsilon);
        let mut s = initial_state(&config.initial_state, scenario, &mut rng);
        for t in 1..cfg.horizon {
            let u: f64 = rng.gen();
            let actions = feasible_actions_unchecked(s, cfg.fleet_size);
            let (observed, outcome) = if u < eps {
                table.explore_decisions += 1;
                let d = schedule.sample_pair(t, &mut rng);
                let a = actions[rng.gen_range(0..actions.len())];
                let out = next_state_unchecked(s, a, d);
                let v = realized_reward(s, a, &out, cfg) + table.values.get(t + 1, out.next_state);
                (v, out)
            } else {
                demands.clear();
                demands.extend((0..config.tau2).map(|_| schedule.sample_pair(t, &mut rng)));
                let scored = actions
                    .iter()
                    .map(|&a| (a, sample_score(s, a, &demands, &table.values, t, cfg)));
                let (a, v) = argmax_action(scored).expect("idle action always feasible");
                let d = schedule.sample_pair(t, &mut rng);
                (v, next_state_unchecked(s, a, d))
            };
            table.total_decisions += 1;
            smooth_update(&mut table, t, s, observed, &config.stepsize);
            s = outcome.next_state;
        }
        if n % every == 0 || n == config.tau1 {
            let v = table.values.get(1, table.reference_state);
            table.trace.push((n, v));
        }
    }
    Ok(table)
}

/// Greedy policy read off the learned values at every `(t, s)`.
pub fn greedy_policy(
    scenario: &Scenario,
    table: &ApproxValueTable,
    config: &RLConfig,
) -> Result<PolicyTable> {
    let cfg = &scenario.model;
    if table.values.fleet() != cfg.fleet_size || table.values.horizon() != cfg.horizon {
        return Err(Error::Incompatible(
            "value table does not match scenario dimensions".into(),
        ));
    }
    let exact = greedy_scoring(cfg, config) == Scoring::Exact;
    let mut policy = PolicyTable::new(cfg, &table.values.scenario_hash, "rl");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    for t in 1..cfg.horizon {
        for s in cfg.state_space().iter() {
            let (a, _) = if exact {
                select_action_exact(&table.values, s, t, &scenario.schedule, cfg)
            } else {
                select_action(
                    &table.values,
                    s,
                    t,
                    &scenario.schedule,
                    cfg,
                    config.tau2,
                    &mut rng,
                )
            };
            policy.set(t, s, a);
        }
    }
    Ok(policy)
}

pub fn greedy_scoring(cfg: &ModelConfig, config: &RLConfig) -> Scoring {
    if cfg.fleet_size
        <= config
            .exact_greedy_max_fleet
            .min(BiOptions::default().max_fleet)
    {
        Scoring::Exact
    } else {
        Scoring::Sampled(config.tau2)
    }
}
