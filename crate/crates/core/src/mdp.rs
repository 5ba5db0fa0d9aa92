//! State, action, transition and reward model for a swap station serving two
//! demand classes.
//!
//! Batteries sit at charge level 0, 1 or 2. A level-`i` battery can fly a
//! class-`i` mission or any lower class. Each epoch the station picks how many
//! batteries to recharge (0→1, 0→2, 1→2); the batteries being recharged are
//! out of service for that epoch and come back charged at the next one. Demand
//! is then served same-level first, and any leftover level-2 batteries cover
//! the residual class-1 demand and return at level 1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::demand::EpochDemandDistribution;
use crate::error::{Error, Result};

/// Number of demand classes (and non-zero charge levels) the model supports.
pub const NUM_CLASSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub fleet_size: usize,
    /// `N`: decisions happen at epochs `1..N`, the terminal reward is paid at `N`.
    pub horizon: usize,
    pub rho11: f64,
    pub rho21: f64,
    pub rho22: f64,
}

impl ModelConfig {
    pub fn new(
        fleet_size: usize,
        horizon: usize,
        rho11: f64,
        rho21: f64,
        rho22: f64,
    ) -> Result<Self> {
        let cfg = ModelConfig {
            fleet_size,
            horizon,
            rho11,
            rho21,
            rho22,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Like [`ModelConfig::new`] but with an explicit class count, which must be 2.
    pub fn with_classes(
        num_classes: usize,
        fleet_size: usize,
        horizon: usize,
        rho11: f64,
        rho21: f64,
        rho22: f64,
    ) -> Result<Self> {
        if num_classes != NUM_CLASSES {
            return Err(Error::invalid(format!(
                "only {NUM_CLASSES} demand classes are supported, got {num_classes}"
            )));
        }
        Self::new(fleet_size, horizon, rho11, rho21, rho22)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::invalid(format!(
                "horizon must be at least 2, got {}",
                self.horizon
            )));
        }
        for (name, w) in [
            ("rho11", self.rho11),
            ("rho21", self.rho21),
            ("rho22", self.rho22),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be a finite nonnegative weight, got {w}"
                )));
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        NUM_CLASSES
    }

    /// Decision epochs `1..=N-1`.
    pub fn decision_epochs(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.horizon - 1
    }

    pub fn state_space(&self) -> StateSpace {
        StateSpace::new(self.fleet_size)
    }
}

/// Battery counts at charge levels 1 and 2; level 0 holds the rest of the fleet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    pub s1: usize,
    pub s2: usize,
}

impl State {
    pub const fn new(s1: usize, s2: usize) -> Self {
        State { s1, s2 }
    }

    pub fn is_valid(&self, fleet: usize) -> bool {
        self.s1 + self.s2 <= fleet
    }

    /// Number of empty batteries. Only meaningful for a valid state.
    pub fn empty(&self, fleet: usize) -> usize {
        fleet - self.s1 - self.s2
    }

    pub fn check(&self, fleet: usize) -> Result<()> {
        if self.is_valid(fleet) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "state ({}, {}) holds more than the {fleet} batteries in the fleet",
                self.s1, self.s2
            )))
        }
    }
}

/// Recharge decision: `a01` empty→1, `a02` empty→2, `a12` level 1→2.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct Action {
    pub a01: usize,
    pub a02: usize,
    pub a12: usize,
}

impl Action {
    pub const IDLE: Action = Action {
        a01: 0,
        a02: 0,
        a12: 0,
    };

    pub const fn new(a01: usize, a02: usize, a12: usize) -> Self {
        Action { a01, a02, a12 }
    }

    pub fn is_feasible(&self, s: State, fleet: usize) -> bool {
        s.is_valid(fleet) && self.a01 + self.a02 <= s.empty(fleet) && self.a12 <= s.s1
    }

    pub fn check(&self, s: State, fleet: usize) -> Result<()> {
        s.check(fleet)?;
        if self.is_feasible(s, fleet) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "action ({}, {}, {}) is infeasible in state ({}, {}) with fleet {fleet}",
                self.a01, self.a02, self.a12, s.s1, s.s2
            )))
        }
    }

    /// Tie-break key: among equally valued actions the one with the greatest
    /// `(a02, a12, a01)` wins.
    pub fn preference_key(&self) -> (usize, usize, usize) {
        (self.a02, self.a12, self.a01)
    }

    pub fn total(&self) -> usize {
        self.a01 + self.a02 + self.a12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Demand {
    pub d1: usize,
    pub d2: usize,
}

impl Demand {
    pub const fn new(d1: usize, d2: usize) -> Self {
        Demand { d1, d2 }
    }

    pub fn total(&self) -> usize {
        self.d1 + self.d2
    }
}

/// Battery counts at levels 1 and 2 after same-level service, before level-2
/// batteries pick up leftover class-1 demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntermediateState {
    pub l1: usize,
    pub l2: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionOutcome {
    pub next_state: State,
    pub intermediate: IntermediateState,
    pub met_c1_lvl1: usize,
    pub met_c1_lvl2: usize,
    pub met_c2_lvl2: usize,
    pub unmet_c1: usize,
    pub unmet_c2: usize,
}

impl TransitionOutcome {
    pub fn met_c1(&self) -> usize {
        self.met_c1_lvl1 + self.met_c1_lvl2
    }

    pub fn met_total(&self) -> usize {
        self.met_c1_lvl1 + self.met_c1_lvl2 + self.met_c2_lvl2
    }

    /// Level-2 batteries that served class-1 demand.
    pub fn spill(&self) -> usize {
        self.met_c1_lvl2
    }
}

/// Dense indexing of `{(s1, s2) : s1 + s2 <= M}` by triangular numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    fleet: usize,
}

impl StateSpace {
    pub fn new(fleet: usize) -> Self {
        StateSpace { fleet }
    }

    pub fn fleet(&self) -> usize {
        self.fleet
    }

    pub fn len(&self) -> usize {
        (self.fleet + 1) * (self.fleet + 2) / 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row `s1` starts after `sum_{k < s1} (M + 1 - k)` entries.
    #[inline]
    pub fn index(&self, s: State) -> usize {
        debug_assert!(s.is_valid(self.fleet));
        let m = self.fleet;
        s.s1 * (m + 1) - s.s1 * s.s1.saturating_sub(1) / 2 + s.s2
    }

    pub fn state(&self, index: usize) -> State {
        let mut rest = index;
        let mut s1 = 0;
        loop {
            let row = self.fleet + 1 - s1;
            if rest < row {
                return State::new(s1, rest);
            }
            rest -= row;
            s1 += 1;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = State> + '_ {
        let m = self.fleet;
        (0..=m).flat_map(move |s1| (0..=m - s1).map(move |s2| State::new(s1, s2)))
    }
}

/// All feasible actions in lexicographic `(a01, a02, a12)` order.
pub fn feasible_actions(s: State, cfg: &ModelConfig) -> Result<Vec<Action>> {
    s.check(cfg.fleet_size)?;
    Ok(feasible_actions_unchecked(s, cfg.fleet_size))
}

pub(crate) fn feasible_actions_unchecked(s: State, fleet: usize) -> Vec<Action> {
    let e = s.empty(fleet);
    let mut out = Vec::with_capacity(action_count(s, fleet));
    for a01 in 0..=e {
        for a02 in 0..=e - a01 {
            for a12 in 0..=s.s1 {
                out.push(Action::new(a01, a02, a12));
            }
        }
    }
    out
}

/// `(e+1)(e+2)/2 * (s1+1)` with `e` the number of empty batteries.
pub fn action_count(s: State, fleet: usize) -> usize {
    let e = s.empty(fleet);
    (e + 1) * (e + 2) / 2 * (s.s1 + 1)
}

pub fn intermediate_state(
    s: State,
    a: Action,
    d: Demand,
    cfg: &ModelConfig,
) -> Result<IntermediateState> {
    a.check(s, cfg.fleet_size)?;
    Ok(intermediate_unchecked(s, a, d))
}

fn intermediate_unchecked(s: State, a: Action, d: Demand) -> IntermediateState {
    let servable1 = s.s1 - a.a12;
    IntermediateState {
        l1: s.s1 + a.a01 - a.a12 - servable1.min(d.d1),
        l2: s.s2 + a.a02 + a.a12 - s.s2.min(d.d2),
    }
}

pub fn next_state(s: State, a: Action, d: Demand, cfg: &ModelConfig) -> Result<TransitionOutcome> {
    a.check(s, cfg.fleet_size)?;
    Ok(next_state_unchecked(s, a, d))
}

/// Transition without feasibility checks; callers guarantee `a` is feasible for `s`.
#[inline]
pub fn next_state_unchecked(s: State, a: Action, d: Demand) -> TransitionOutcome {
    let servable1 = s.s1 - a.a12;
    let met_c1_lvl1 = servable1.min(d.d1);
    let met_c2_lvl2 = s.s2.min(d.d2);
    let residual_c1 = d.d1 - met_c1_lvl1;
    let leftover_lvl2 = s.s2 - met_c2_lvl2;
    let spill = residual_c1.min(leftover_lvl2);
    let intermediate = intermediate_unchecked(s, a, d);
    TransitionOutcome {
        next_state: State::new(intermediate.l1 + spill, intermediate.l2 - spill),
        intermediate,
        met_c1_lvl1,
        met_c1_lvl2: spill,
        met_c2_lvl2,
        unmet_c1: residual_c1 - spill,
        unmet_c2: d.d2 - met_c2_lvl2,
    }
}

/// Immediate reward written in terms of the pre-decision state, the
/// intermediate state and the next state.
pub fn realized_reward(s: State, a: Action, outcome: &TransitionOutcome, cfg: &ModelConfig) -> f64 {
    let l1 = outcome.intermediate.l1 as i64;
    let l2 = outcome.intermediate.l2 as i64;
    let j2 = outcome.next_state.s2 as i64;
    let lvl1_used = s.s1 as i64 + a.a01 as i64 - a.a12 as i64 - l1;
    let spilled = l2 - j2;
    let lvl2_used = s.s2 as i64 + a.a02 as i64 + a.a12 as i64 - l2;
    debug_assert!(
        lvl1_used >= 0 && spilled >= 0 && lvl2_used >= 0,
        "outcome not produced from (s, a)"
    );
    cfg.rho11 * lvl1_used as f64 + cfg.rho21 * spilled as f64 + cfg.rho22 * lvl2_used as f64
}

#[inline]
pub(crate) fn met_reward(
    met_c1_lvl1: usize,
    met_c1_lvl2: usize,
    met_c2_lvl2: usize,
    cfg: &ModelConfig,
) -> f64 {
    cfg.rho11 * met_c1_lvl1 as f64 + cfg.rho21 * met_c1_lvl2 as f64 + cfg.rho22 * met_c2_lvl2 as f64
}

pub fn terminal_reward(s: State, cfg: &ModelConfig) -> f64 {
    cfg.rho11 * s.s1 as f64 + cfg.rho22 * s.s2 as f64
}

/// One lumped demand event of the closed-form transition law: its probability,
/// the resulting state and how demand was met.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub prob: f64,
    pub next_state: State,
    pub met_c1_lvl1: usize,
    pub met_c1_lvl2: usize,
    pub met_c2_lvl2: usize,
}

/// Walks the closed-form transition law for `(s, a)`.
///
/// With `n1 = s1 - a12` level-1 batteries and `n2 = s2` level-2 batteries in
/// service, the demand plane splits into five events:
///
/// 1. `D1 < n1`, `D2 < n2`: no spill, `p1(D1) p2(D2)`.
/// 2. `D1 < n1`, `D2 >= n2`: level 2 exhausted, `p1(D1) q2(n2)`.
/// 3. `D1 >= n1`, `D2 >= n2`: both exhausted, `q1(n1) q2(n2)`.
/// 4. `D1 = n1 + k`, `D2 < n2`, `k < n2 - D2`: `k` level-2 batteries spill
///    over to class 1, `p1(n1 + k) p2(D2)`.
/// 5. `D1 >= n1 + (n2 - D2)`, `D2 < n2`: every leftover level-2 battery
///    spills, `q1(n1 + n2 - D2) p2(D2)`.
///
/// Zero-probability events are skipped. Several events can land on the same
/// next state with different rewards.
pub fn for_each_branch<F>(
    s: State,
    a: Action,
    dist1: &EpochDemandDistribution,
    dist2: &EpochDemandDistribution,
    mut visit: F,
) where
    F: FnMut(Branch),
{
    let n1 = s.s1 - a.a12;
    let n2 = s.s2;
    let base1 = a.a01;
    let base2 = a.a02 + a.a12;
    let mut emit = |prob: f64, j1: usize, j2: usize, m11: usize, m12: usize, m22: usize| {
        if prob > 0.0 {
            visit(Branch {
                prob,
                next_state: State::new(j1, j2),
                met_c1_lvl1: m11,
                met_c1_lvl2: m12,
                met_c2_lvl2: m22,
            });
        }
    };

    for d2 in 0..n2.min(dist2.d_max() + 1) {
        let p2 = dist2.prob(d2);
        if p2 == 0.0 {
            continue;
        }
        let leftover = n2 - d2;
        let l2 = base2 + leftover;
        // case 1
        for d1 in 0..n1.min(dist1.d_max() + 1) {
            emit(dist1.prob(d1) * p2, base1 + n1 - d1, l2, d1, 0, d2);
        }
        // case 4
        for k in 0..leftover {
            emit(dist1.prob(n1 + k) * p2, base1 + k, l2 - k, n1, k, d2);
        }
        // case 5
        emit(
            dist1.tail_or_zero(n1 + leftover) * p2,
            base1 + leftover,
            base2,
            n1,
            leftover,
            d2,
        );
    }

    let q2 = dist2.tail_or_zero(n2);
    if q2 > 0.0 {
        // case 2
        for d1 in 0..n1.min(dist1.d_max() + 1) {
            emit(dist1.prob(d1) * q2, base1 + n1 - d1, base2, d1, 0, n2);
        }
        // case 3
        emit(dist1.tail_or_zero(n1) * q2, base1, base2, n1, 0, n2);
    }
}

/// `p(j | s, a)` over reachable next states.
pub fn transition_distribution(
    s: State,
    a: Action,
    dist1: &EpochDemandDistribution,
    dist2: &EpochDemandDistribution,
    cfg: &ModelConfig,
) -> Result<BTreeMap<State, f64>> {
    a.check(s, cfg.fleet_size)?;
    let mut out = BTreeMap::new();
    for_each_branch(s, a, dist1, dist2, |b| {
        *out.entry(b.next_state).or_insert(0.0) += b.prob
    });
    Ok(out)
}

pub fn expected_reward(
    s: State,
    a: Action,
    dist1: &EpochDemandDistribution,
    dist2: &EpochDemandDistribution,
    cfg: &ModelConfig,
) -> Result<f64> {
    a.check(s, cfg.fleet_size)?;
    let mut total = 0.0;
    for_each_branch(s, a, dist1, dist2, |b| {
        total += b.prob * met_reward(b.met_c1_lvl1, b.met_c1_lvl2, b.met_c2_lvl2, cfg);
    });
    Ok(total)
}

/// Compensated (Kahan) sum, used where many small probabilities are added.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}
