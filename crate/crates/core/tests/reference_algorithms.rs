use synccount_core::verifier::{self, BadDepth, GraphLimits};
use synccount_core::*;

#[test]
fn table4_stabilises_in_exactly_seven_rounds() {
    let alg = reference::table4();
    assert_eq!(alg.class(), AlgorithmClass::Cyclic);
    assert_eq!((alg.params().n, alg.params().f, alg.params().s), (4, 1, 3));
    let report = verifier::check_stabilization(&alg, 7).unwrap();
    assert_eq!(report.verdict, Verdict::Stabilizes);
    assert_eq!(report.stabilization_time(), Some(7));
    assert!(report.counterexample.is_none());
}

#[test]
fn table4_fails_at_six_with_replayable_counterexample() {
    let alg = reference::table4();
    let report = verifier::check_stabilization(&alg, 6).unwrap();
    assert_eq!(report.verdict, Verdict::Fails);
    let cx = report.counterexample.clone().expect("failing report carries a trace");
    // Seven configurations: a walk of six steps that is still not good.
    assert_eq!(cx.len(), 7);
    assert!(verifier::replays(&alg, &cx).unwrap());
    let last = cx.configs.last().unwrap();
    let n = alg.params().n;
    let uniform = |v| (0..n).all(|i| last.get(i).is_none_or(|x| x == v));
    assert!(!uniform(0) && !uniform(1));
    let cert = report.to_certificate();
    assert!(cert.contains("verdict=fails"), "{cert}");
}

#[test]
fn table5_stabilises_in_six_rounds() {
    let alg = reference::table5();
    assert_eq!(alg.class(), AlgorithmClass::General);
    assert_eq!((alg.params().n, alg.params().f, alg.params().s), (6, 1, 2));
    let report = verifier::check_stabilization(&alg, 6).unwrap();
    assert_eq!(report.verdict, Verdict::Stabilizes);
    assert!(report.stabilization_time().unwrap() <= 6);
    assert_eq!(report.per_fault.len(), 7);
}

#[test]
fn cyclic_representatives_agree_with_all_fault_sets() {
    let alg = reference::table4();
    let all = verifier::check_fault_sets(
        &alg,
        &FaultSet::all_up_to(4, 1),
        StabilizationBounds::uniform(7),
        GraphLimits::default(),
    )
    .unwrap();
    let reps = verifier::check_stabilization(&alg, 7).unwrap();
    assert_eq!(all.stabilization_time(), reps.stabilization_time());
    let times: Vec<_> = all.per_fault.iter().skip(1).map(|r| r.stab_time).collect();
    assert!(times.windows(2).all(|w| w[0] == w[1]), "{times:?}");
}

#[test]
fn cyclic_and_general_forms_verify_identically() {
    let alg = reference::table4();
    let general = alg.to_general();
    assert_eq!(general.class(), AlgorithmClass::General);
    let a = verifier::check_stabilization(&alg, 7).unwrap();
    let b = verifier::check_stabilization(&general, 7).unwrap();
    assert_eq!(a.stabilization_time(), b.stabilization_time());
}

#[test]
fn bad_sets_shrink_to_empty_at_the_stabilisation_time() {
    let alg = reference::table4();
    let g = verifier::build_projection_graph(&alg, &FaultSet::singleton(0)).unwrap();
    assert!(g.good_cycle_exclusive());
    let mut previous = g.bad_set(0).len();
    for d in 1..=7 {
        let size = g.bad_set(d).len();
        assert!(size <= previous);
        previous = size;
    }
    assert!(!g.bad_set(6).is_empty());
    assert!(g.bad_set(7).is_empty());
    assert_eq!(g.stabilization_time(), Some(7));
    assert!(g.depth(g.zero()) == BadDepth::Good);
}

#[test]
fn dot_export_groups_by_distance() {
    let alg = reference::table4();
    let g = verifier::build_projection_graph(&alg, &FaultSet::singleton(0)).unwrap();
    let dot = verifier::export_dot(&g);
    assert!(dot.starts_with("digraph"));
    assert!(dot.contains("cluster_7"));
    assert!(!dot.contains("cluster_8"));
    assert_eq!(dot.matches("->").count(), g.edge_count());
}

#[test]
fn text_format_round_trips() {
    for alg in [reference::table4(), reference::table5()] {
        let back = Algorithm::from_text(&alg.to_text()).unwrap();
        assert_eq!(back, alg);
    }
}

#[test]
fn trivial_algorithms() {
    let flip = reference::flip();
    assert_eq!(
        verifier::check_stabilization(&flip, 0).unwrap().stabilization_time(),
        Some(0)
    );
    let id = reference::identity(Params::new(3, 0, 2, 5).unwrap());
    let report = verifier::check_stabilization(&id, 5).unwrap();
    assert_eq!(report.verdict, Verdict::Fails);
    assert_eq!(report.stabilization_time(), None);
}
