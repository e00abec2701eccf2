//! Cross-checks against brute-force oracles written independently of the
//! library's own enumeration code.

mod common;

use common::*;
use proptest::prelude::*;
use synccount_core::cegar::{self, CegarOptions, Variant};
use synccount_core::direct::{self, SynthOptions};
use synccount_core::verifier;
use synccount_core::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn reachability_matches_oracle_n3_f1(bits in 0u64..(1 << 24)) {
        let alg = general_from_bits(Params::new(3, 1, 2, 1).unwrap(), bits);
        check_reachability_against_oracle(&alg).map_err(TestCaseError::fail)?;
    }
}

#[test]
fn reachability_matches_oracle_exhaustive_n2_f0() {
    let params = Params::new(2, 0, 2, 1).unwrap();
    for bits in 0..256 {
        check_reachability_against_oracle(&general_from_bits(params, bits)).unwrap();
    }
}

#[test]
fn verifier_matches_iteration_exhaustive_n2_f0() {
    let params = Params::new(2, 0, 2, 1).unwrap();
    for bits in 0..256 {
        let alg = general_from_bits(params, bits);
        let exact = verifier::check_stabilization(&alg, 0).unwrap().stabilization_time();
        let oracle = (0..=4).find(|&t| oracle_stabilizes_fault_free(&alg, t));
        assert_eq!(exact, oracle, "algorithm bits {bits:#x}");
    }
}

#[test]
fn direct_synthesis_matches_enumeration_n2_f0() {
    for t in 0..=2 {
        let params = Params::new(2, 0, 2, t).unwrap();
        let exists = (0..256).any(|bits| oracle_stabilizes_fault_free(&general_from_bits(params, bits), t));
        let out = direct::synthesize(params, AlgorithmClass::General, &SynthOptions::default()).unwrap();
        assert_eq!(out.is_realizable(), exists, "t={t}");
        assert_eq!(out.is_unrealizable(), !exists, "t={t}");
        if let direct::SynthOutcome::Realizable { algorithm, .. } = out {
            assert!(oracle_stabilizes_fault_free(&algorithm, t));
        }
    }
}

#[test]
fn cyclic_synthesis_matches_enumeration_n2_f0() {
    for t in 0..=2 {
        let params = Params::new(2, 0, 2, t).unwrap();
        let exists = (0..16u8).any(|bits| {
            let table = (0..4).map(|u| (bits >> u) & 1).collect();
            oracle_stabilizes_fault_free(&Algorithm::cyclic(params, table).unwrap(), t)
        });
        let out = direct::synthesize(params, AlgorithmClass::Cyclic, &SynthOptions::default()).unwrap();
        assert_eq!(out.is_realizable(), exists, "t={t}");
    }
}

#[test]
fn cegar_variants_match_enumeration_n2_f0() {
    for t in 0..=2 {
        let params = Params::new(2, 0, 2, t).unwrap();
        let exists = (0..256).any(|bits| oracle_stabilizes_fault_free(&general_from_bits(params, bits), t));
        for variant in [Variant::Basic, Variant::ShortLoop, Variant::Overshoot] {
            let r = cegar::run(
                variant,
                params,
                AlgorithmClass::General,
                Some(t),
                &CegarOptions::default(),
                &mut |_| {},
            )
            .unwrap();
            assert!(!r.timed_out);
            assert_eq!(r.best.is_some(), exists, "{variant:?} t={t}");
            match r.best {
                Some((alg, achieved)) => {
                    assert!(achieved <= t);
                    assert!(oracle_stabilizes_fault_free(&alg, achieved));
                    // Overshooting keeps tightening below the bound it met.
                    assert!(r.unrealizable_at.is_none_or(|u| u < achieved));
                }
                None => assert_eq!(r.unrealizable_at, Some(t), "{variant:?} t={t}"),
            }
        }
    }
}

#[test]
fn verifier_matches_exhaustive_walk_search_n3_f1_sample() {
    // Exhaustive bad-walk search over actual configurations as a second
    // oracle for the exact stabilisation time.
    let params = Params::new(3, 1, 2, 1).unwrap();
    let mut rng = 0x2545_f491_4f6c_dd1du64;
    for _ in 0..40 {
        rng ^= rng << 13;
        rng ^= rng >> 7;
        rng ^= rng << 17;
        let alg = general_from_bits(params, rng & 0xff_ffff);
        for faults in fault_sets(3, 1) {
            let configs = actuals(3, 2, &faults);
            let good = |x: &Vec<Option<u8>>| {
                x.iter().all(|v| v.is_none_or(|v| v == 0)) || x.iter().all(|v| v.is_none_or(|v| v == 1))
            };
            let succ: Vec<Vec<usize>> = configs
                .iter()
                .map(|x| {
                    (0..configs.len())
                        .filter(|&j| oracle_reachable(&alg, x, &configs[j]))
                        .collect()
                })
                .collect();
            // Longest good-avoiding walk by repeated relaxation, capped.
            let cap = configs.len() + 1;
            let mut longest = vec![0usize; configs.len()];
            for _ in 0..=cap {
                for x in 0..configs.len() {
                    if good(&configs[x]) {
                        continue;
                    }
                    let best = succ[x]
                        .iter()
                        .filter(|&&y| !good(&configs[y]))
                        .map(|&y| longest[y] + 1)
                        .max()
                        .unwrap_or(0);
                    longest[x] = longest[x].max(best).min(cap);
                }
            }
            let zero = configs.iter().position(|x| x.iter().all(|v| v.is_none_or(|v| v == 0))).unwrap();
            let one = configs.iter().position(|x| x.iter().all(|v| v.is_none_or(|v| v == 1))).unwrap();
            let exclusive = succ[zero] == [one] && succ[one] == [zero];
            let any_bad = configs.iter().any(|x| !good(x));
            let worst = configs
                .iter()
                .enumerate()
                .filter(|(_, x)| !good(x))
                .map(|(i, _)| longest[i])
                .max();
            let oracle = match (exclusive, any_bad, worst) {
                (false, _, _) => None,
                (true, false, _) => Some(0),
                (true, true, Some(w)) if w < cap => Some(w as u32 + 1),
                _ => None,
            };
            let fs = FaultSet::new(faults.clone(), 3).unwrap();
            let g = verifier::build_projection_graph(&alg, &fs).unwrap();
            assert_eq!(g.stabilization_time(), oracle, "F={faults:?}");
        }
    }
}
