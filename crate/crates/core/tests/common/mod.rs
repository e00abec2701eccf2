//! Brute-force oracles shared by the oracle suite and the acceptance run.
#![allow(dead_code)]

use synccount_core::model::ObservedConfig;
use synccount_core::verifier::is_reachable;
use synccount_core::*;

pub fn digits(mut index: usize, n: usize, s: usize) -> Vec<u8> {
    (0..n)
        .map(|_| {
            let d = (index % s) as u8;
            index /= s;
            d
        })
        .collect()
}

/// All actual configurations for `faults`, as `Option` vectors.
pub fn actuals(n: usize, s: usize, faults: &[usize]) -> Vec<Vec<Option<u8>>> {
    (0..s.pow(n as u32))
        .map(|k| digits(k, n, s))
        .filter(|d| faults.iter().all(|&j| d[j] == 0))
        .map(|d| {
            d.into_iter()
                .enumerate()
                .map(|(i, v)| (!faults.contains(&i)).then_some(v))
                .collect()
        })
        .collect()
}

/// `y` is reachable from `x` iff every non-faulty node has some observation
/// agreeing with `x` on non-faulty entries that leads it to `y_i`.
pub fn oracle_reachable(alg: &Algorithm, x: &[Option<u8>], y: &[Option<u8>]) -> bool {
    let p = alg.params();
    let (n, s) = (p.n, p.s);
    (0..n).filter(|&i| y[i].is_some()).all(|i| {
        (0..s.pow(n as u32)).any(|k| {
            let u = digits(k, n, s);
            let agrees = (0..n).all(|j| x[j].is_none_or(|v| v == u[j]));
            let u = ObservedConfig::new(u, s).unwrap();
            agrees && alg.transition(i, &u).unwrap() == y[i].unwrap()
        })
    })
}

pub fn fault_sets(n: usize, f: usize) -> Vec<Vec<usize>> {
    (0..1usize << n)
        .filter(|m| m.count_ones() as usize <= f)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

pub fn check_reachability_against_oracle(alg: &Algorithm) -> Result<(), String> {
    let p = alg.params();
    for faults in fault_sets(p.n, p.f) {
        let fs = FaultSet::new(faults.clone(), p.n).unwrap();
        let configs = actuals(p.n, p.s, &faults);
        for x in &configs {
            let ax = ActualConfig::new(x.clone(), p.s).unwrap();
            for y in &configs {
                let ay = ActualConfig::new(y.clone(), p.s).unwrap();
                let got = is_reachable(alg, &fs, &ax, &ay).unwrap();
                if got != oracle_reachable(alg, x, y) {
                    return Err(format!("F={faults:?} x={ax} y={ay}: library says {got}"));
                }
            }
        }
    }
    Ok(())
}

pub fn general_from_bits(params: Params, bits: u64) -> Algorithm {
    let size = params.observed_count();
    let tables = (0..params.n)
        .map(|i| {
            (0..size)
                .map(|u| ((bits >> (i * size + u)) & 1) as u8)
                .collect()
        })
        .collect();
    Algorithm::general(params, tables).unwrap()
}

/// Fault-free stabilisation by direct iteration: after `t` steps every
/// start must sit on the alternating all-0/all-1 cycle.
pub fn oracle_stabilizes_fault_free(alg: &Algorithm, t: u32) -> bool {
    let p = alg.params();
    let (n, s) = (p.n, p.s);
    let step = |x: &Vec<u8>| -> Vec<u8> {
        let u = ObservedConfig::new(x.clone(), s).unwrap();
        (0..n).map(|i| alg.transition(i, &u).unwrap()).collect()
    };
    let zero = vec![0u8; n];
    let one = vec![1u8; n];
    if step(&zero) != one || step(&one) != zero {
        return false;
    }
    (0..s.pow(n as u32)).all(|k| {
        let mut x = digits(k, n, s);
        for _ in 0..t {
            x = step(&x);
        }
        x == zero || x == one
    })
}
