use proptest::prelude::*;
use synccount_core::sim::{self, Adversary, Init, MonteCarloOptions, RandomizedCounter};
use synccount_core::verifier;
use synccount_core::*;

#[test]
fn greedy_adversary_reaches_but_never_exceeds_seven_rounds() {
    let alg = reference::table4();
    for node in 0..4 {
        let faults = FaultSet::singleton(node);
        let init = sim::worst_initial(&alg, &faults).unwrap();
        let trace = sim::run(&alg, Adversary::Greedy { seed: 0 }, &faults, &init, 20, 0).unwrap();
        assert_eq!(trace.stabilization_round(4), Some(7), "F={faults}\n{trace}");
    }
}

#[test]
fn random_adversary_never_exceeds_the_verified_bound() {
    let alg = reference::table4();
    let faults = FaultSet::singleton(2);
    for seed in 0..200 {
        let init: Vec<usize> = (0..4).map(|i| (sim::derive_seed(seed, &[i]) % 3) as usize).collect();
        let trace = sim::run(&alg, Adversary::Random { seed }, &faults, &init, 16, seed).unwrap();
        assert!(trace.stabilization_round(4).unwrap() <= 7);
    }
}

#[test]
fn uniform_start_is_stable_immediately() {
    let rc = RandomizedCounter::new(4, 0).unwrap();
    for v in 0..2 {
        let stats = sim::run_randomized(
            &rc,
            Adversary::None,
            &FaultSet::empty(),
            &Init::Fixed(vec![v; 4]),
            20,
            MonteCarloOptions::default(),
        )
        .unwrap();
        assert!(stats.trials.iter().all(|t| t.stabilized_at == Some(0)));
    }
}

#[test]
fn randomized_counter_meets_its_expected_time_bound() {
    let rc = RandomizedCounter::new(4, 1).unwrap();
    let stats = sim::run_randomized(
        &rc,
        Adversary::Random { seed: 42 },
        &FaultSet::singleton(0),
        &Init::Random,
        1000,
        MonteCarloOptions {
            seed: 7,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(stats.censored(), 0);
    assert!(stats.mean().unwrap() <= 9.0, "{stats}");
    assert_eq!(stats.rule_violations(), 0);
}

#[test]
fn rules_one_and_two_never_fire_together() {
    for (n, f) in [(4, 0), (4, 1), (7, 2), (10, 3)] {
        let rc = RandomizedCounter::new(n, f).unwrap();
        let faults = FaultSet::new((0..f).collect(), n).unwrap();
        let stats = sim::run_randomized(
            &rc,
            Adversary::Random { seed: n as u64 },
            &faults,
            &Init::Random,
            300,
            MonteCarloOptions {
                seed: 1,
                round_cap: 2000,
                window: 4,
            },
        )
        .unwrap();
        assert_eq!(stats.rule_violations(), 0, "n={n} f={f}");
        let bound = f64::from((1u32 << (2 * f + 2)) + 1);
        assert!(stats.mean().unwrap() <= bound, "n={n} f={f}: {stats}");
    }
}

#[test]
fn stats_summary_lists_all_fields() {
    let rc = RandomizedCounter::new(4, 1).unwrap();
    let stats = sim::run_randomized(
        &rc,
        Adversary::Random { seed: 1 },
        &FaultSet::singleton(3),
        &Init::Random,
        10,
        MonteCarloOptions::default(),
    )
    .unwrap();
    let text = stats.to_string();
    for key in ["trials", "censored", "mean", "median", "max", "rule violations"] {
        assert!(text.contains(key), "{text}");
    }
}

fn algorithm_from_seed(params: Params, seed: u64) -> Algorithm {
    let mut k = 0u64;
    Algorithm::from_fn(params, AlgorithmClass::General, |_, _| {
        k += 1;
        (sim::derive_seed(seed, &[k]) % params.s as u64) as u8
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fault_free_trace_is_repeated_transition(seed in any::<u64>(), init in proptest::collection::vec(0usize..3, 3)) {
        let params = Params::new(3, 0, 3, 1).unwrap();
        let alg = algorithm_from_seed(params, seed);
        let trace = sim::run(&alg, Adversary::None, &FaultSet::empty(), &init, 10, seed).unwrap();
        let mut x: Vec<u8> = init.iter().map(|&v| v as u8).collect();
        for r in 0..=10 {
            let expected: Vec<Option<usize>> = x.iter().map(|&v| Some(v as usize)).collect();
            prop_assert_eq!(&trace.rounds[r], &expected);
            let u = ObservedConfig::new(x.clone(), 3).unwrap();
            x = (0..3).map(|i| alg.transition(i, &u).unwrap()).collect();
        }
    }

    #[test]
    fn adversarial_steps_are_projection_graph_edges(
        seed in any::<u64>(),
        faulty in 0usize..4,
        init in proptest::collection::vec(0usize..2, 4),
    ) {
        let params = Params::new(4, 1, 2, 1).unwrap();
        let alg = algorithm_from_seed(params, seed);
        let faults = FaultSet::singleton(faulty);
        let trace = sim::run(&alg, Adversary::Random { seed }, &faults, &init, 8, seed).unwrap();
        for r in 0..8 {
            let x = trace.actual_config(r).unwrap();
            let y = trace.actual_config(r + 1).unwrap();
            prop_assert!(verifier::is_reachable(&alg, &faults, &x, &y).unwrap());
        }
    }

    #[test]
    fn runs_replay_under_fixed_seeds(seed in any::<u64>()) {
        let rc = RandomizedCounter::new(5, 1).unwrap();
        let faults = FaultSet::singleton(4);
        let init = vec![0, 1, 0, 1, 1];
        let a = sim::run(&rc, Adversary::Random { seed }, &faults, &init, 30, seed).unwrap();
        let b = sim::run(&rc, Adversary::Random { seed }, &faults, &init, 30, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
