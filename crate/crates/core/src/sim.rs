//! Seeded sample-path simulation, service metrics and parameter sweeps.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{backward_induction, BenchmarkPolicy, Policy};
use crate::flat::{flat_backward_induction, flat_next_state, FlatPolicyTable};
use crate::mdp::{
    next_state_unchecked, realized_reward, terminal_reward, Action, Demand, State,
    TransitionOutcome,
};
use crate::rl::{greedy_policy, train, RLConfig};
use crate::scenario::Scenario;

/// Rng for path `index`. Every policy sees the same demand stream for the
/// same `(seed, index)`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStep {
    pub t: usize,
    pub state: State,
    pub action: Action,
    pub demand: Demand,
    pub outcome: TransitionOutcome,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SamplePathResult {
    pub index: u64,
    /// Kept only when a dump is requested.
    pub steps: Vec<PathStep>,
    pub realized: [u64; 2],
    pub met: [u64; 2],
    pub met_c1_lvl1: u64,
    pub met_c1_lvl2: u64,
    /// Totals of `a01`, `a02`, `a12` over the path.
    pub actions: [u64; 3],
    /// Decision epochs simulated.
    pub epochs: usize,
    /// Epoch rewards plus the terminal reward.
    pub total_reward: f64,
}

impl SamplePathResult {
    pub fn met_pct(&self) -> f64 {
        pct_met_demand(
            self.met[0] + self.met[1],
            self.realized[0] + self.realized[1],
        )
    }

    pub fn met_pct_class(&self, class: usize) -> f64 {
        pct_met_demand(self.met[class - 1], self.realized[class - 1])
    }

    /// Mean of action component `k` per decision epoch.
    pub fn action_rate(&self, k: usize) -> f64 {
        if self.epochs == 0 {
            0.0
        } else {
            self.actions[k] as f64 / self.epochs as f64
        }
    }
}

/// `100 * met / realized`; 100 when nothing was requested.
pub fn pct_met_demand(met: u64, realized: u64) -> f64 {
    if realized == 0 {
        100.0
    } else {
        100.0 * met as f64 / realized as f64
    }
}

/// `100 * |exact - approx| / exact`.
pub fn optimality_gap(exact_value: f64, approx_value: f64) -> Result<f64> {
    if exact_value.is_nan() || exact_value <= 0.0 {
        return Err(Error::invalid(
            "optimality gap needs a positive exact value",
        ));
    }
    Ok(100.0 * (exact_value - approx_value).abs() / exact_value)
}

/// Mean per-path totals of `(a01, a02, a12)`.
pub fn avg_actions(paths: &[SamplePathResult]) -> Result<[f64; 3]> {
    if paths.is_empty() {
        return Err(Error::invalid("no sample paths"));
    }
    let n = paths.len() as f64;
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = paths.iter().map(|p| p.actions[k] as f64).sum::<f64>() / n;
    }
    Ok(out)
}

pub fn simulate_path<P: Policy + ?Sized>(
    scenario: &Scenario,
    policy: &P,
    seed: u64,
    index: u64,
    keep_steps: bool,
) -> Result<SamplePathResult> {
    let cfg = &scenario.model;
    let mut rng = path_rng(seed, index);
    let mut out = SamplePathResult {
        index,
        epochs: cfg.horizon - 1,
        ..Default::default()
    };
    let mut s = scenario.initial_state;
    for t in 1..cfg.horizon {
        let a = policy.action(t, s);
        a.check(s, cfg.fleet_size)?;
        let d = scenario.schedule.sample_pair(t, &mut rng);
        let o = next_state_unchecked(s, a, d);
        let r = realized_reward(s, a, &o, cfg);
        out.realized[0] += d.d1 as u64;
        out.realized[1] += d.d2 as u64;
        out.met[0] += o.met_c1() as u64;
        out.met[1] += o.met_c2_lvl2 as u64;
        out.met_c1_lvl1 += o.met_c1_lvl1 as u64;
        out.met_c1_lvl2 += o.met_c1_lvl2 as u64;
        out.actions[0] += a.a01 as u64;
        out.actions[1] += a.a02 as u64;
        out.actions[2] += a.a12 as u64;
        out.total_reward += r;
        if keep_steps {
            out.steps.push(PathStep {
                t,
                state: s,
                action: a,
                demand: d,
                outcome: o,
                reward: r,
            });
        }
        s = o.next_state;
    }
    out.total_reward += terminal_reward(s, cfg);
    Ok(out)
}

/// Aggregates over sample paths. Percentages average per-path percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub n_paths: usize,
    pub seed: u64,
    pub avg_met_pct_total: f64,
    /// Absent for the flat model, which does not track classes.
    pub avg_met_pct_c1: Option<f64>,
    pub avg_met_pct_c2: Option<f64>,
    /// Shares of realized class-1 demand met from each level; zero on paths
    /// without class-1 requests.
    pub avg_met_c1_by_lvl1_pct: Option<f64>,
    pub avg_met_c1_by_lvl2_pct: Option<f64>,
    pub avg_a01: f64,
    pub avg_a02: f64,
    pub avg_a12: f64,
    pub expected_total_reward_estimate: f64,
    pub se_met_pct_total: f64,
    pub se_total_reward: f64,
    /// Standard errors of `avg_a01`, `avg_a02`, `avg_a12`.
    pub se_actions: [f64; 3],
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn lvl_share(met: u64, realized: u64) -> f64 {
    if realized == 0 {
        0.0
    } else {
        100.0 * met as f64 / realized as f64
    }
}

impl MetricsSummary {
    pub fn from_paths(paths: &[SamplePathResult], seed: u64) -> Result<Self> {
        let acts = avg_actions(paths)?;
        let se_action = |k: usize| {
            mean_and_se(
                &paths
                    .iter()
                    .map(|p| p.actions[k] as f64)
                    .collect::<Vec<_>>(),
            )
            .1
        };
        let col = |f: &dyn Fn(&SamplePathResult) -> f64| paths.iter().map(f).collect::<Vec<f64>>();
        let (met, se_met) = mean_and_se(&col(&|p| p.met_pct()));
        let (reward, se_reward) = mean_and_se(&col(&|p| p.total_reward));
        let avg = |f: &dyn Fn(&SamplePathResult) -> f64| mean_and_se(&col(f)).0;
        Ok(MetricsSummary {
            n_paths: paths.len(),
            seed,
            avg_met_pct_total: met,
            avg_met_pct_c1: Some(avg(&|p| p.met_pct_class(1))),
            avg_met_pct_c2: Some(avg(&|p| p.met_pct_class(2))),
            avg_met_c1_by_lvl1_pct: Some(avg(&|p| lvl_share(p.met_c1_lvl1, p.realized[0]))),
            avg_met_c1_by_lvl2_pct: Some(avg(&|p| lvl_share(p.met_c1_lvl2, p.realized[0]))),
            avg_a01: acts[0],
            avg_a02: acts[1],
            avg_a12: acts[2],
            expected_total_reward_estimate: reward,
            se_met_pct_total: se_met,
            se_total_reward: se_reward,
            se_actions: [se_action(0), se_action(1), se_action(2)],
        })
    }

    pub fn csv_header() -> &'static str {
        "param,solver,n_paths,seed,avg_met_pct,avg_met_pct_c1,avg_met_pct_c2,met_c1_lvl1_pct,met_c1_lvl2_pct,avg_a01,avg_a02,avg_a12,mean_reward"
    }

    pub fn csv_row(&self, param: &str, solver: &str) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{param},{solver},{},{},{},{},{},{},{},{},{},{},{}",
            self.n_paths,
            self.seed,
            self.avg_met_pct_total,
            opt(self.avg_met_pct_c1),
            opt(self.avg_met_pct_c2),
            opt(self.avg_met_c1_by_lvl1_pct),
            opt(self.avg_met_c1_by_lvl2_pct),
            self.avg_a01,
            self.avg_a02,
            self.avg_a12,
            self.expected_total_reward_estimate
        )
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub summary: MetricsSummary,
    pub paths: Vec<SamplePathResult>,
}

impl SimulationOutput {
    pub fn path_means(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.paths.iter().map(|p| p.met_pct()).collect(),
            self.paths.iter().map(|p| p.total_reward).collect(),
        )
    }

    /// `path,t,s1,s2,a01,a02,a12,d1,d2,met_c1_l1,met_c1_l2,met_c2,reward`.
    pub fn dump_csv(&self) -> String {
        let mut out =
            String::from("path,t,s1,s2,a01,a02,a12,d1,d2,met_c1_l1,met_c1_l2,met_c2,reward\n");
        for p in &self.paths {
            for st in &p.steps {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    p.index,
                    st.t,
                    st.state.s1,
                    st.state.s2,
                    st.action.a01,
                    st.action.a02,
                    st.action.a12,
                    st.demand.d1,
                    st.demand.d2,
                    st.outcome.met_c1_lvl1,
                    st.outcome.met_c1_lvl2,
                    st.outcome.met_c2_lvl2,
                    st.reward
                );
            }
        }
        out
    }
}

pub fn simulate_paths<P: Policy + ?Sized>(
    scenario: &Scenario,
    policy: &P,
    n_paths: usize,
    seed: u64,
    keep_steps: bool,
) -> Result<SimulationOutput> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be at least 1"));
    }
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_path(scenario, policy, seed, i, keep_steps))
        .collect::<Result<Vec<_>>>()?;
    let summary = MetricsSummary::from_paths(&paths, seed)?;
    Ok(SimulationOutput { summary, paths })
}

/// Flat-model simulation on the same demand streams; the request count is
/// `d1 + d2`. Flat recharges are reported as `a02`.
pub fn simulate_flat_paths(
    scenario: &Scenario,
    policy: &FlatPolicyTable,
    n_paths: usize,
    seed: u64,
    keep_steps: bool,
) -> Result<SimulationOutput> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be at least 1"));
    }
    let m = scenario.model.fleet_size;
    let start = scenario.initial_state.s1 + scenario.initial_state.s2;
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<SamplePathResult> {
            let mut rng = path_rng(seed, i);
            let mut out = SamplePathResult {
                index: i,
                epochs: scenario.model.horizon - 1,
                ..Default::default()
            };
            let mut s = start;
            for t in 1..scenario.model.horizon {
                let a = policy.get(t, s);
                let d = scenario.schedule.sample_pair(t, &mut rng);
                let (next, served) = flat_next_state(s, a, d.total(), m)?;
                out.realized[0] += d.d1 as u64;
                out.realized[1] += d.d2 as u64;
                out.met[0] += served as u64;
                out.actions[1] += a as u64;
                out.total_reward += served as f64;
                if keep_steps {
                    out.steps.push(PathStep {
                        t,
                        state: State::new(s, 0),
                        action: Action::new(0, a, 0),
                        demand: d,
                        outcome: TransitionOutcome {
                            next_state: State::new(next, 0),
                            intermediate: crate::mdp::IntermediateState { l1: next, l2: 0 },
                            met_c1_lvl1: served,
                            met_c1_lvl2: 0,
                            met_c2_lvl2: 0,
                            unmet_c1: d.total() - served,
                            unmet_c2: 0,
                        },
                        reward: served as f64,
                    });
                }
                s = next;
            }
            out.total_reward += s as f64;
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summary = MetricsSummary::from_paths(&paths, seed)?;
    summary.avg_met_pct_c1 = None;
    summary.avg_met_pct_c2 = None;
    summary.avg_met_c1_by_lvl1_pct = None;
    summary.avg_met_c1_by_lvl2_pct = None;
    Ok(SimulationOutput { summary, paths })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    FleetSize,
    Rho21,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fleet_size" => Ok(SweepParam::FleetSize),
            "rho21" => Ok(SweepParam::Rho21),
            other => Err(Error::invalid(format!("unknown sweep parameter '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::FleetSize => "fleet_size",
            SweepParam::Rho21 => "rho21",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Bi,
    Rl,
    Benchmark,
    Flat,
}

impl SolverKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bi" => Ok(SolverKind::Bi),
            "rl" => Ok(SolverKind::Rl),
            "benchmark" => Ok(SolverKind::Benchmark),
            "flat" => Ok(SolverKind::Flat),
            other => Err(Error::invalid(format!("unknown solver '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Bi => "bi",
            SolverKind::Rl => "rl",
            SolverKind::Benchmark => "benchmark",
            SolverKind::Flat => "flat",
        }
    }
}

/// `from, from + step, ...` up to `to` inclusive, snapped to 1e-9.
pub fn sweep_range(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(from.is_finite() && to.is_finite() && step.is_finite()) || step <= 0.0 || to < from {
        return Err(Error::invalid(
            "sweep range needs from <= to and a positive step",
        ));
    }
    let count = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| ((from + k as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// Applies one sweep value to the scenario.
pub fn with_param(scenario: &Scenario, param: SweepParam, value: f64) -> Result<Scenario> {
    match param {
        SweepParam::FleetSize => {
            if value < 0.0 || value.fract() != 0.0 {
                return Err(Error::invalid(format!(
                    "fleet size {value} is not a whole number"
                )));
            }
            scenario.with_fleet_size(value as usize)
        }
        SweepParam::Rho21 => scenario.with_rho21(value),
    }
}

/// Solves `scenario` with `solver` and simulates the resulting policy.
pub fn solve_and_simulate(
    scenario: &Scenario,
    solver: SolverKind,
    n_paths: usize,
    seed: u64,
    rl_config: &RLConfig,
) -> Result<SimulationOutput> {
    match solver {
        SolverKind::Bi => {
            let (_, policy) = backward_induction(scenario)?;
            simulate_paths(scenario, &policy, n_paths, seed, false)
        }
        SolverKind::Rl => {
            let table = train(scenario, rl_config)?;
            let policy = greedy_policy(scenario, &table, rl_config)?;
            simulate_paths(scenario, &policy, n_paths, seed, false)
        }
        SolverKind::Benchmark => simulate_paths(
            scenario,
            &BenchmarkPolicy {
                fleet: scenario.model.fleet_size,
            },
            n_paths,
            seed,
            false,
        ),
        SolverKind::Flat => {
            let (_, policy) = flat_backward_induction(scenario)?;
            simulate_flat_paths(scenario, &policy, n_paths, seed, false)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub output: SimulationOutput,
}

/// One simulation per parameter value, all on the same seed.
pub fn sweep(
    scenario: &Scenario,
    param: SweepParam,
    values: &[f64],
    solver: SolverKind,
    n_paths: usize,
    seed: u64,
    rl_config: &RLConfig,
) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&value| {
            let sc = with_param(scenario, param, value)?;
            let output = solve_and_simulate(&sc, solver, n_paths, seed, rl_config)?;
            Ok(SweepRow { value, output })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow], solver: SolverKind) -> String {
    let mut out = String::from(MetricsSummary::csv_header());
    out.push('\n');
    for row in rows {
        out.push_str(
            &row.output
                .summary
                .csv_row(&row.value.to_string(), solver.name()),
        );
        out.push('\n');
    }
    out
}
