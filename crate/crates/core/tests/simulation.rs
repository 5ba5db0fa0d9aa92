mod common;

use common::desk;
use swapdp_core::exact::{backward_induction, evaluate_fixed_policy, BenchmarkPolicy};
use swapdp_core::flat::{flat_backward_induction, flat_evaluate};
use swapdp_core::sim::{simulate_flat_paths, sweep, SolverKind, SweepParam};
use swapdp_core::{simulate_paths, RLConfig};

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn monte_carlo_reward_matches_exact_value() {
    for m in [2, 4] {
        let sc = desk(m);
        let (v, p) = backward_induction(&sc).unwrap();
        let out = simulate_paths(&sc, &p, 4000, 11, false).unwrap();
        let rewards: Vec<f64> = out.paths.iter().map(|p| p.total_reward).collect();
        let (mean, se) = mean_and_se(&rewards);
        let exact = v.get(1, sc.initial_state);
        assert!(
            (mean - exact).abs() <= 3.0 * se,
            "M={m}: {mean} +- {se} vs {exact}"
        );

        let bench = BenchmarkPolicy { fleet: m };
        let vb = evaluate_fixed_policy(&sc, &bench)
            .unwrap()
            .get(1, sc.initial_state);
        let out = simulate_paths(&sc, &bench, 4000, 11, false).unwrap();
        let (mean, se) = mean_and_se(&out.paths.iter().map(|p| p.total_reward).collect::<Vec<_>>());
        assert!((mean - vb).abs() <= 3.0 * se);
    }
}

#[test]
fn flat_monte_carlo_matches_exact_value() {
    let sc = desk(5);
    let (v, p) = flat_backward_induction(&sc).unwrap();
    let check = flat_evaluate(&sc, |t, s| p.get(t, s)).unwrap();
    let s0 = sc.initial_state.s1 + sc.initial_state.s2;
    assert!((check.get(1, s0) - v.get(1, s0)).abs() < 1e-9);
    let out = simulate_flat_paths(&sc, &p, 4000, 5, false).unwrap();
    let (mean, se) = mean_and_se(&out.paths.iter().map(|p| p.total_reward).collect::<Vec<_>>());
    assert!(
        (mean - v.get(1, s0)).abs() <= 3.0 * se,
        "{mean} +- {se} vs {}",
        v.get(1, s0)
    );
}

#[test]
fn common_random_numbers_across_policies() {
    let sc = desk(3);
    let (_, p) = backward_induction(&sc).unwrap();
    let a = simulate_paths(&sc, &p, 50, 9, false).unwrap();
    let b = simulate_paths(&sc, &BenchmarkPolicy { fleet: 3 }, 50, 9, false).unwrap();
    let (fp, _) = {
        let (v, p) = flat_backward_induction(&sc).unwrap();
        (p, v)
    };
    let c = simulate_flat_paths(&sc, &fp, 50, 9, false).unwrap();
    for ((x, y), z) in a.paths.iter().zip(&b.paths).zip(&c.paths) {
        assert_eq!(x.realized, y.realized);
        assert_eq!(
            x.realized.iter().sum::<u64>(),
            z.realized.iter().sum::<u64>()
        );
    }
}

#[test]
fn sweep_rows_follow_values() {
    let sc = desk(3);
    let rows = sweep(
        &sc,
        SweepParam::FleetSize,
        &[2.0, 3.0],
        SolverKind::Bi,
        20,
        0,
        &RLConfig::default(),
    )
    .unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].value, 2.0);
    assert_eq!(rows[1].output.summary.n_paths, 20);
}
