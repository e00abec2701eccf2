use proptest::prelude::*;
use synccount_core::cegar::{self, CegarOptions, Variant};
use synccount_core::direct::{self, SynthOptions, SynthOutcome};
use synccount_core::solver::{self, Backend, Limits};
use synccount_core::verifier;
use synccount_core::*;

fn synth(n: usize, f: usize, s: usize, t: u32, class: AlgorithmClass) -> SynthOutcome {
    let params = Params::new(n, f, s, t).unwrap();
    direct::synthesize(params, class, &SynthOptions::default()).unwrap()
}

#[test]
fn cyclic_4_1_3_at_seven_is_realizable() {
    let out = synth(4, 1, 3, 7, AlgorithmClass::Cyclic);
    let SynthOutcome::Realizable { algorithm, report, .. } = out else {
        panic!("expected a realizable instance, got {out:?}");
    };
    assert_eq!(algorithm.class(), AlgorithmClass::Cyclic);
    assert!(report.stabilization_time().unwrap() <= 7);
    // Independent re-check of the decoded table.
    let again = verifier::check_stabilization(&algorithm, 7).unwrap();
    assert_eq!(again.verdict, Verdict::Stabilizes);
}

#[test]
fn cyclic_4_1_3_at_six_is_unrealizable() {
    assert!(synth(4, 1, 3, 6, AlgorithmClass::Cyclic).is_unrealizable());
}

#[test]
fn two_states_never_suffice_for_four_nodes() {
    // t = 2^3 - 2 is the largest bound worth asking for.
    let params = Params::new(4, 1, 2, 6).unwrap();
    assert_eq!(params.max_useful_time(), 6);
    assert!(synth(4, 1, 2, 6, AlgorithmClass::General).is_unrealizable());
}

#[test]
fn dimacs_boundary_round_trip() {
    let params = Params::new(3, 0, 2, 2).unwrap();
    let instance = direct::encode(params, AlgorithmClass::General).unwrap();
    let text = direct::emit_dimacs(&instance);
    assert!(text.lines().any(|l| l.starts_with("p cnf ")));
    let parsed = direct::parse_dimacs(&text).unwrap();
    assert_eq!(parsed.cnf, instance.cnf);
    assert_eq!(parsed.atlas.num_vars(), instance.atlas.num_vars());
    let result =
        solver::solve_oneshot(&Backend::InProcess, &parsed.cnf, Limits::unlimited(), Some(7)).unwrap();
    let model = result.model.expect("satisfiable");
    let alg = direct::decode(&model, &parsed).unwrap();
    assert!(verifier::check_stabilization(&alg, 2).unwrap().stabilizes());
}

#[test]
fn fault_free_bound_is_enforced() {
    let params = Params::new(4, 1, 3, 7).unwrap().with_t0(3).unwrap();
    let out = direct::synthesize(params, AlgorithmClass::Cyclic, &SynthOptions::default()).unwrap();
    if let SynthOutcome::Realizable { algorithm, .. } = out {
        let g = verifier::build_projection_graph(&algorithm, &FaultSet::empty()).unwrap();
        assert!(g.stabilization_time().unwrap() <= 3);
    }
}

#[test]
fn variable_cap_is_reported() {
    let params = Params::new(4, 1, 3, 7).unwrap();
    assert!(direct::encode_with_cap(params, AlgorithmClass::General, 1000).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn realizability_is_monotone_in_t(t in 0u32..5, cyclic in any::<bool>()) {
        let class = if cyclic { AlgorithmClass::Cyclic } else { AlgorithmClass::General };
        let out = synth(3, 0, 2, t, class);
        if let SynthOutcome::Realizable { algorithm, .. } = out {
            let relaxed = algorithm.with_params(Params::new(3, 0, 2, t + 1).unwrap()).unwrap();
            prop_assert!(verifier::check_stabilization(&relaxed, t + 1).unwrap().stabilizes());
            prop_assert!(synth(3, 0, 2, t + 1, class).is_realizable());
        }
    }

    #[test]
    fn cegar_agrees_with_direct_on_small_instances(
        n in 3usize..5,
        t in 0u32..4,
        variant in prop_oneof![Just(Variant::Basic), Just(Variant::ShortLoop), Just(Variant::Overshoot)],
    ) {
        let f = usize::from(n == 4);
        let params = Params::new(n, f, 2, t).unwrap();
        let direct = direct::synthesize(params, AlgorithmClass::General, &SynthOptions::default()).unwrap();
        let r = cegar::run(variant, params, AlgorithmClass::General, Some(t), &CegarOptions::default(), &mut |_| {}).unwrap();
        prop_assert!(!r.timed_out);
        prop_assert_eq!(r.best.is_some(), direct.is_realizable());
        if let Some((alg, achieved)) = r.best {
            prop_assert!(achieved <= t);
            let report = verifier::check_stabilization(&alg, achieved).unwrap();
            prop_assert!(report.stabilizes());
        }
    }
}

#[test]
fn cegar_proves_two_state_nonexistence() {
    let params = Params::new(4, 1, 2, 6).unwrap();
    let r = cegar::run_overshoot(params, AlgorithmClass::General, None, &CegarOptions::default(), &mut |_| {})
        .unwrap();
    assert!(r.best.is_none());
    assert_eq!(r.unrealizable_at, Some(6));
}

#[test]
fn cegar_overshoot_finds_a_stabilising_cyclic_algorithm() {
    let params = Params::new(4, 1, 3, 1).unwrap();
    let options = CegarOptions {
        stop_at: Some(25),
        seed: Some(1),
        time_limit: Some(std::time::Duration::from_secs(300)),
        ..CegarOptions::default()
    };
    let mut found = Vec::new();
    let r = cegar::run_overshoot(params, AlgorithmClass::Cyclic, None, &options, &mut |e| {
        if let cegar::CegarEvent::Found { t, .. } = e {
            found.push(*t);
        }
    })
    .unwrap();
    let (alg, t) = r.best.expect("an algorithm within the time limit");
    assert!(t <= 25);
    assert_eq!(found.last(), Some(&t));
    assert!(verifier::check_stabilization(&alg, t).unwrap().stabilizes());
}
