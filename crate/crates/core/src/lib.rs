//! Finite-horizon battery swap station model with two demand classes:
//! exact and approximate solvers, a no-classification baseline and Monte Carlo
//! evaluation.

pub mod demand;
pub mod error;
pub mod exact;
pub mod flat;
pub mod mdp;
pub mod report;
pub mod rl;
pub mod scenario;
pub mod sim;
pub mod stepsize;
pub mod tables;

pub use demand::{DemandSchedule, EpochDemandDistribution};
pub use error::{Error, Result};
pub use exact::{
    backward_induction, evaluate_fixed_policy, BenchmarkPolicy, Policy, PolicyTable, ValueTable,
};
pub use mdp::{Action, Demand, ModelConfig, State, StateSpace};
pub use rl::{train, ApproxValueTable, RLConfig};
pub use scenario::{Scenario, ScenarioConfig};
pub use sim::{simulate_paths, MetricsSummary};
