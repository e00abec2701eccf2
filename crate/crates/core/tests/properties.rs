use proptest::prelude::*;
use synccount_core::model::ActualSpace;
use synccount_core::solver::{self, Cnf, SolveStatus};
use synccount_core::verifier;
use synccount_core::*;

fn small_shape() -> impl Strategy<Value = (usize, usize)> {
    (1usize..6, 2usize..4).prop_filter("space fits", |(n, s)| s.pow(*n as u32) <= 243)
}

fn cyclic_algorithm(n: usize, f: usize, s: usize) -> impl Strategy<Value = Algorithm> {
    let size = s.pow(n as u32);
    proptest::collection::vec(0..s as u8, size)
        .prop_map(move |table| Algorithm::cyclic(Params::new(n, f, s, 1).unwrap(), table).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn digits_round_trip((n, s) in small_shape(), seed in any::<usize>()) {
        let space = ConfigSpace::new(n, s);
        let k = seed % space.size();
        prop_assert_eq!(space.index(&space.digits(k)), k);
        for pos in 0..n {
            prop_assert_eq!(space.digit(k, pos), space.digits(k)[pos]);
        }
    }

    #[test]
    fn rotations_compose((n, s) in small_shape(), seed in any::<usize>(), a in 0usize..8, b in 0usize..8) {
        let space = ConfigSpace::new(n, s);
        let k = seed % space.size();
        let (a, b) = (a % n, b % n);
        prop_assert_eq!(space.rotate(space.rotate(k, a), b), space.rotate(k, (a + b) % n));
        prop_assert_eq!(space.rotate(k, 0), k);
        let d = space.digits(k);
        let r = space.digits(space.rotate(k, a));
        for pos in 0..n {
            prop_assert_eq!(r[pos], d[(pos + a) % n]);
        }
    }

    #[test]
    fn cyclic_tables_commute_with_rotation(alg in cyclic_algorithm(3, 1, 3), seed in any::<usize>()) {
        let space = alg.params().space();
        let u = seed % space.size();
        for i in 0..3 {
            prop_assert_eq!(alg.transition_index(i, u), alg.transition_index(0, space.rotate(u, i)));
        }
    }

    #[test]
    fn actual_space_indexing(n in 2usize..5, mask in any::<u8>(), seed in any::<usize>()) {
        let s = 3;
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).take(n - 1).collect();
        let faults = FaultSet::new(members.clone(), n).unwrap();
        let space = ActualSpace::new(n, s, faults.clone());
        let k = seed % space.size();
        let x = space.config(k);
        prop_assert_eq!(space.index_of(&x).unwrap(), k);
        prop_assert_eq!(x.fault_set(), faults);
        let pre = space.preimages(k);
        prop_assert_eq!(pre.len(), s.pow(members.len() as u32));
        for u in pre {
            prop_assert_eq!(space.project_observed(u), k);
        }
    }

    #[test]
    fn algorithm_text_round_trip(alg in cyclic_algorithm(3, 1, 2)) {
        prop_assert_eq!(Algorithm::from_text(&alg.to_text()).unwrap(), alg.clone());
        let general = alg.to_general();
        prop_assert_eq!(Algorithm::from_text(&general.to_text()).unwrap(), general);
    }

    #[test]
    fn verdicts_follow_exact_times(alg in cyclic_algorithm(3, 1, 2), t in 0u32..8) {
        let report = verifier::check_stabilization(&alg, t).unwrap();
        let exact = report.stabilization_time();
        prop_assert_eq!(report.stabilizes(), exact.is_some_and(|e| e <= t));
        prop_assert_eq!(report.counterexample.is_some(), !report.stabilizes());
        if let Some(cx) = &report.counterexample {
            prop_assert!(verifier::replays(&alg, cx).unwrap());
        }
    }

    #[test]
    fn stabilisation_time_is_bounded_by_the_useful_maximum(alg in cyclic_algorithm(3, 1, 2)) {
        let report = verifier::check_stabilization(&alg, 0).unwrap();
        if let Some(t) = report.stabilization_time() {
            prop_assert!(u64::from(t) <= alg.params().max_useful_time());
        }
    }

    #[test]
    fn dimacs_round_trip(clauses in proptest::collection::vec(proptest::collection::vec((1i32..30, any::<bool>()), 1..6), 0..20)) {
        let mut cnf = Cnf::new(30);
        for c in clauses {
            cnf.add(c.into_iter().map(|(v, neg)| if neg { -v } else { v }).collect());
        }
        let comments = vec!["hello world".to_string()];
        let (back, got) = Cnf::parse_dimacs(&cnf.to_dimacs(&comments)).unwrap();
        prop_assert_eq!(back, cnf);
        prop_assert_eq!(got, comments);
    }

    #[test]
    fn solver_output_round_trip(values in proptest::collection::vec(any::<bool>(), 1..40)) {
        let model = solver::Model::new(values);
        let text = solver::format_model(&SolveStatus::Sat, Some(&model));
        let (status, lits) = solver::parse_solver_output(&text).unwrap();
        prop_assert_eq!(status, SolveStatus::Sat);
        prop_assert_eq!(solver::Model::from_literals(&lits, model.num_vars()).unwrap(), model);
    }
}

#[test]
fn cyclic_representatives_cover_all_fault_sets() {
    for n in 1..7 {
        for f in 0..n {
            let reps = FaultSet::cyclic_representatives(n, f);
            for fs in FaultSet::all_up_to(n, f) {
                let covered = reps.iter().any(|r| {
                    (0..n).any(|shift| {
                        let mut rotated: Vec<usize> = r.members().iter().map(|&i| (i + shift) % n).collect();
                        rotated.sort_unstable();
                        rotated == fs.members()
                    })
                });
                assert!(covered, "n={n} f={f} F={fs}");
            }
        }
    }
}

#[test]
fn unsatisfiable_output_parses() {
    let (status, lits) = solver::parse_solver_output("s UNSATISFIABLE\n").unwrap();
    assert_eq!(status, SolveStatus::Unsat);
    assert!(lits.is_empty());
}
