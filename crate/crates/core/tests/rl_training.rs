mod common;

use common::desk;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swapdp_core::exact::{action_value, backward_induction};
use swapdp_core::rl::{greedy_policy, select_action, select_action_exact};
use swapdp_core::{evaluate_fixed_policy, train, BenchmarkPolicy, RLConfig};

#[test]
fn sampled_selection_approaches_exact_selection() {
    let sc = desk(5);
    let (v, _) = backward_induction(&sc).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let space = v.space();
    for t in [1, 6, 12] {
        let (d1, d2) = sc.schedule.pair(t);
        for s in space.iter() {
            let (_, best) = select_action_exact(&v, s, t, &sc.schedule, &sc.model);
            let (a, score) = select_action(&v, s, t, &sc.schedule, &sc.model, 10_000, &mut rng);
            let exact_of_pick = action_value(space, v.slice(t + 1), s, a, d1, d2, &sc.model);
            assert!(
                best - exact_of_pick <= 0.01 * best.abs().max(1.0),
                "t={t} s={s:?}"
            );
            assert!((score - exact_of_pick).abs() <= 0.02 * best.abs().max(1.0));
        }
    }
}

#[test]
fn short_run_lands_between_benchmark_and_optimum() {
    let sc = desk(3);
    let cfg = RLConfig {
        tau1: 20_000,
        tau2: 20,
        seed: 5,
        ..RLConfig::default()
    };
    let table = train(&sc, &cfg).unwrap();
    let policy = greedy_policy(&sc, &table, &cfg).unwrap();
    let s0 = sc.initial_state;
    let v_rl = evaluate_fixed_policy(&sc, &policy).unwrap().get(1, s0);
    let (v_bi, _) = backward_induction(&sc).unwrap();
    let v_bench = evaluate_fixed_policy(&sc, &BenchmarkPolicy { fleet: 3 })
        .unwrap()
        .get(1, s0);
    assert!(v_rl <= v_bi.get(1, s0) + 1e-9);
    assert!(v_rl >= v_bench - 1e-9, "{v_rl} < {v_bench}");
    assert!(table.visits(1, s0) > 0);
    assert!(table.explore_decisions < table.total_decisions);
}

#[test]
fn training_is_seeded() {
    let sc = desk(2);
    let cfg = RLConfig {
        tau1: 3_000,
        tau2: 5,
        seed: 77,
        ..RLConfig::default()
    };
    let a = train(&sc, &cfg).unwrap();
    let b = train(&sc, &cfg).unwrap();
    assert_eq!(a.values.raw(), b.values.raw());
    assert_eq!(a.trace, b.trace);
    let c = train(&sc, &RLConfig { seed: 78, ..cfg }).unwrap();
    assert_ne!(a.values.raw(), c.values.raw());
}
