//! Round-by-round simulation with Byzantine adversaries, plus Monte Carlo
//! statistics for the randomised two-state counter.

use std::fmt::{self, Write as _};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{ActualConfig, Algorithm, FaultSet, ModelError};
use crate::transforms::{LayeredCounter, TopologyAlgorithm};
use crate::verifier::{self, ProjectionGraph, VerifyError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("initial configuration has length {got}, expected {expected}")]
    InitLength { got: usize, expected: usize },
    #[error("state {state} out of range, protocol has {states} states")]
    StateOutOfRange { state: usize, states: usize },
    #[error("fault set {faults} does not fit {n} nodes")]
    BadFaults { faults: FaultSet, n: usize },
    #[error("invalid randomised counter: {0}")]
    InvalidCounter(String),
}

/// A synchronous protocol: every round each node maps the states it observes
/// (its own entry included) to its next state.
pub trait Protocol: Sync {
    fn nodes(&self) -> usize;

    /// Size of the per-node state space.
    fn states(&self) -> usize;

    /// Counting modulus of the output.
    fn modulus(&self) -> u32 {
        2
    }

    /// Output value of a state, `None` if the state carries no valid output.
    fn output(&self, state: usize) -> Option<u32>;

    fn step(&self, node: usize, observed: &[usize], coin: &mut dyn RngCore) -> usize;

    /// Which numbered rule the node applies, for protocols that have them.
    fn rule(&self, _node: usize, _observed: &[usize]) -> Option<u8> {
        None
    }

    /// The underlying deterministic complete-graph algorithm, if any.
    fn algorithm(&self) -> Option<&Algorithm> {
        None
    }
}

fn two_state_output(state: usize) -> Option<u32> {
    (state <= 1).then_some(state as u32)
}

impl Protocol for Algorithm {
    fn nodes(&self) -> usize {
        self.params().n
    }

    fn states(&self) -> usize {
        self.params().s
    }

    fn output(&self, state: usize) -> Option<u32> {
        two_state_output(state)
    }

    fn step(&self, node: usize, observed: &[usize], _coin: &mut dyn RngCore) -> usize {
        let s = self.params().s;
        let index = observed.iter().rev().fold(0usize, |acc, &u| acc * s + u);
        self.transition_index(node, index) as usize
    }

    fn algorithm(&self) -> Option<&Algorithm> {
        Some(self)
    }
}

impl Protocol for TopologyAlgorithm {
    fn nodes(&self) -> usize {
        self.node_count()
    }

    fn states(&self) -> usize {
        TopologyAlgorithm::states(self)
    }

    fn output(&self, state: usize) -> Option<u32> {
        two_state_output(state)
    }

    fn step(&self, node: usize, observed: &[usize], _coin: &mut dyn RngCore) -> usize {
        let digits: Vec<u8> = observed.iter().map(|&u| u as u8).collect();
        TopologyAlgorithm::step(self, node, &digits) as usize
    }
}

impl Protocol for LayeredCounter {
    fn nodes(&self) -> usize {
        self.n()
    }

    fn states(&self) -> usize {
        LayeredCounter::states(self)
    }

    fn modulus(&self) -> u32 {
        1 << self.depth()
    }

    fn output(&self, state: usize) -> Option<u32> {
        LayeredCounter::output(self, state)
    }

    fn step(&self, node: usize, observed: &[usize], _coin: &mut dyn RngCore) -> usize {
        LayeredCounter::step(self, node, observed)
    }
}

/// The randomised two-state counter: a node seeing more than `(n+f)/2`
/// zeros moves to 1 (rule 1), otherwise one seeing more than `(n+f)/2` ones
/// moves to 0 (rule 2), otherwise it adopts a fair coin (rule 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomizedCounter {
    pub n: usize,
    pub f: usize,
}

impl RandomizedCounter {
    pub fn new(n: usize, f: usize) -> Result<Self, SimError> {
        if n < 4 || 3 * f >= n {
            return Err(SimError::InvalidCounter(format!(
                "needs n >= 4 and f < n/3, got n={n} f={f}"
            )));
        }
        Ok(RandomizedCounter { n, f })
    }

    fn supermajority(&self, count: usize) -> bool {
        2 * count > self.n + self.f
    }
}

impl Protocol for RandomizedCounter {
    fn nodes(&self) -> usize {
        self.n
    }

    fn states(&self) -> usize {
        2
    }

    fn output(&self, state: usize) -> Option<u32> {
        two_state_output(state)
    }

    fn step(&self, node: usize, observed: &[usize], coin: &mut dyn RngCore) -> usize {
        match self.rule(node, observed) {
            Some(1) => 1,
            Some(2) => 0,
            _ => (coin.next_u32() & 1) as usize,
        }
    }

    fn rule(&self, _node: usize, observed: &[usize]) -> Option<u8> {
        let zeros = observed.iter().filter(|&&u| u == 0).count();
        let ones = observed.len() - zeros;
        Some(if self.supermajority(zeros) {
            1
        } else if self.supermajority(ones) {
            2
        } else {
            3
        })
    }
}

/// How faulty nodes report their states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adversary {
    /// Faulty nodes run the protocol honestly.
    None,
    /// Independent uniform reports per round, faulty node and recipient.
    Random { seed: u64 },
    /// One-step lookahead on the projection graph: steer the non-faulty
    /// nodes to the successor with the longest remaining distance to a good
    /// configuration. Falls back to random reports for protocols without a
    /// projection graph.
    Greedy { seed: u64 },
}

impl Adversary {
    fn seed(&self) -> u64 {
        match *self {
            Adversary::None => 0,
            Adversary::Random { seed } | Adversary::Greedy { seed } => seed,
        }
    }
}

impl fmt::Display for Adversary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Adversary::None => f.write_str("none"),
            Adversary::Random { seed } => write!(f, "random(seed={seed})"),
            Adversary::Greedy { seed } => write!(f, "greedy(seed={seed})"),
        }
    }
}

/// Mixes a seed with stream identifiers (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, stream: &[u64]) -> u64 {
    let mut z = seed;
    for &s in stream {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(s);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

/// A simulated execution: per round the states of all nodes, `None` at
/// faulty positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub faults: FaultSet,
    pub states: usize,
    pub modulus: u32,
    pub rounds: Vec<Vec<Option<usize>>>,
    pub outputs: Vec<Option<u32>>,
}

impl Trace {
    /// First round from which every remaining round has a common output that
    /// advances by one each round, provided at least `window` rounds remain.
    pub fn stabilization_round(&self, window: usize) -> Option<usize> {
        let len = self.outputs.len();
        let mut start = len;
        for r in (0..len).rev() {
            let Some(c) = self.outputs[r] else { break };
            if r + 1 < len && self.outputs[r + 1] != Some((c + 1) % self.modulus) {
                break;
            }
            start = r;
        }
        (len - start >= window.max(1)).then_some(start)
    }

    /// Configuration of round `r` in the model's `*` notation, for protocols
    /// with at most 64 states.
    pub fn actual_config(&self, r: usize) -> Result<ActualConfig, ModelError> {
        let entries = self.rounds[r]
            .iter()
            .map(|x| x.map(|v| v as u8))
            .collect();
        ActualConfig::new(entries, self.states)
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let compact = self.states <= 10;
        for (r, config) in self.rounds.iter().enumerate() {
            let mut line = String::new();
            for (i, x) in config.iter().enumerate() {
                if !compact && i > 0 {
                    line.push(' ');
                }
                match x {
                    Some(v) => {
                        let _ = write!(line, "{v}");
                    }
                    None => line.push('*'),
                }
            }
            match self.outputs[r] {
                Some(o) => writeln!(f, "{r} {line} out={o}")?,
                None => writeln!(f, "{r} {line} out=-")?,
            }
        }
        Ok(())
    }
}

struct Greedy {
    graph: ProjectionGraph,
}

impl Greedy {
    fn score(&self, y: usize) -> u32 {
        self.graph.rounds_to_good(y).unwrap_or(u32::MAX)
    }

    /// Reports `reports[victim][k]` from the `k`-th faulty node.
    fn plan(&self, alg: &Algorithm, states: &[usize], reports: &mut [Vec<usize>]) {
        let space = self.graph.space();
        let s = space.s();
        let x = space
            .free_nodes()
            .iter()
            .rev()
            .fold(0usize, |acc, &i| acc * s + states[i]);
        let target = self
            .graph
            .successors(x)
            .max_by_key(|&y| (self.score(y), std::cmp::Reverse(y)))
            .expect("every configuration has a successor");
        let preimages = space.preimages(x);
        let obs_space = alg.params().space();
        for (k, &victim) in space.free_nodes().iter().enumerate() {
            let want = space.free_digit(target, k);
            let u = preimages
                .iter()
                .copied()
                .find(|&u| alg.transition_index(victim, u) == want)
                .expect("target is a successor");
            for (slot, &j) in space.faults().members().iter().enumerate() {
                reports[victim][slot] = obs_space.digit(u, j) as usize;
            }
        }
    }
}

/// Mutable state of one simulated execution.
pub struct Simulation<'a, P: Protocol + ?Sized> {
    protocol: &'a P,
    faults: FaultSet,
    adversary: Adversary,
    greedy: Option<Greedy>,
    states: Vec<usize>,
    coins: Vec<ChaCha8Rng>,
    adversary_rng: ChaCha8Rng,
    reports: Vec<Vec<usize>>,
    round: usize,
}

impl<'a, P: Protocol + ?Sized> Simulation<'a, P> {
    /// `seed` drives the coins and the adversary; `stream` separates
    /// independent trials under one seed.
    pub fn new(
        protocol: &'a P,
        adversary: Adversary,
        faults: FaultSet,
        init: &[usize],
        seed: u64,
        stream: u64,
    ) -> Result<Self, SimError> {
        let n = protocol.nodes();
        if init.len() != n {
            return Err(SimError::InitLength {
                got: init.len(),
                expected: n,
            });
        }
        if let Some(&state) = init.iter().find(|&&v| v >= protocol.states()) {
            return Err(SimError::StateOutOfRange {
                state,
                states: protocol.states(),
            });
        }
        if faults.members().iter().any(|&i| i >= n) {
            return Err(SimError::BadFaults { faults, n });
        }
        let greedy = match (adversary, protocol.algorithm()) {
            (Adversary::Greedy { .. }, Some(alg)) if !faults.is_empty() => Some(Greedy {
                graph: verifier::build_projection_graph(alg, &faults)?,
            }),
            _ => None,
        };
        let coins = (0..n as u64)
            .map(|i| ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream, 1, i])))
            .collect();
        let adversary_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed ^ adversary.seed(), &[stream, 2]));
        Ok(Simulation {
            protocol,
            reports: vec![vec![0; faults.len()]; n],
            faults,
            adversary,
            greedy,
            states: init.to_vec(),
            coins,
            adversary_rng,
            round: 0,
        })
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    /// States with faulty positions hidden.
    pub fn visible(&self) -> Vec<Option<usize>> {
        self.states
            .iter()
            .enumerate()
            .map(|(i, &x)| (!self.faults.contains(i)).then_some(x))
            .collect()
    }

    /// Common output of the non-faulty nodes, if they agree on a valid one.
    pub fn output(&self) -> Option<u32> {
        let mut common = None;
        for (i, &x) in self.states.iter().enumerate() {
            if self.faults.contains(i) {
                continue;
            }
            let o = self.protocol.output(x)?;
            if *common.get_or_insert(o) != o {
                return None;
            }
        }
        common
    }

    fn choose_reports(&mut self) {
        let states = self.protocol.states();
        match (self.adversary, &self.greedy) {
            (Adversary::None, _) => {
                for row in &mut self.reports {
                    for (slot, &j) in self.faults.members().iter().enumerate() {
                        row[slot] = self.states[j];
                    }
                }
            }
            (_, Some(greedy)) => {
                let alg = self.protocol.algorithm().expect("greedy needs an algorithm");
                greedy.plan(alg, &self.states, &mut self.reports);
            }
            _ => {
                for row in &mut self.reports {
                    for r in row.iter_mut() {
                        *r = self.adversary_rng.gen_range(0..states);
                    }
                }
            }
        }
    }

    /// Advances one round and returns the numbered rules applied by the
    /// non-faulty nodes.
    #[allow(clippy::needless_range_loop)]
    pub fn step(&mut self) -> Result<Vec<Option<u8>>, SimError> {
        self.choose_reports();
        let n = self.states.len();
        let honest = matches!(self.adversary, Adversary::None);
        let mut next = self.states.clone();
        let mut rules = Vec::with_capacity(n);
        let mut observed = self.states.clone();
        for i in 0..n {
            let faulty = self.faults.contains(i);
            if faulty && !honest {
                continue;
            }
            for (slot, &j) in self.faults.members().iter().enumerate() {
                let report = self.reports[i][slot];
                if report >= self.protocol.states() {
                    return Err(SimError::StateOutOfRange {
                        state: report,
                        states: self.protocol.states(),
                    });
                }
                observed[j] = report;
            }
            next[i] = self.protocol.step(i, &observed, &mut self.coins[i]);
            if !faulty {
                rules.push(self.protocol.rule(i, &observed));
            }
        }
        if cfg!(debug_assertions) {
            if let Some(alg) = self.protocol.algorithm() {
                let before = self.actual(&self.states)?;
                let after = self.actual(&next)?;
                debug_assert!(verifier::is_reachable(alg, &self.faults, &before, &after)?);
            }
        }
        self.states = next;
        self.round += 1;
        Ok(rules)
    }

    fn actual(&self, states: &[usize]) -> Result<ActualConfig, ModelError> {
        let entries = states
            .iter()
            .enumerate()
            .map(|(i, &x)| (!self.faults.contains(i)).then_some(x as u8))
            .collect();
        ActualConfig::new(entries, self.protocol.states())
    }
}

/// Simulates `rounds` rounds and records the configurations `x^0..x^rounds`.
pub fn run<P: Protocol + ?Sized>(
    protocol: &P,
    adversary: Adversary,
    faults: &FaultSet,
    init: &[usize],
    rounds: usize,
    seed: u64,
) -> Result<Trace, SimError> {
    let mut sim = Simulation::new(protocol, adversary, faults.clone(), init, seed, 0)?;
    let mut trace = Trace {
        faults: faults.clone(),
        states: protocol.states(),
        modulus: protocol.modulus(),
        rounds: vec![sim.visible()],
        outputs: vec![sim.output()],
    };
    for _ in 0..rounds {
        sim.step()?;
        trace.rounds.push(sim.visible());
        trace.outputs.push(sim.output());
    }
    Ok(trace)
}

/// A configuration of `alg` under `faults` with the largest worst-case
/// distance to a good configuration, in node order (faulty entries 0).
pub fn worst_initial(alg: &Algorithm, faults: &FaultSet) -> Result<Vec<usize>, SimError> {
    let g = verifier::build_projection_graph(alg, faults)?;
    let worst = (0..g.node_count())
        .max_by_key(|&x| (g.rounds_to_good(x).unwrap_or(u32::MAX), std::cmp::Reverse(x)))
        .expect("non-empty graph");
    let config = g.config(worst);
    Ok((0..alg.params().n)
        .map(|i| config.get(i).unwrap_or(0) as usize)
        .collect())
}

#[derive(Debug, Clone)]
pub enum Init {
    Fixed(Vec<usize>),
    /// Uniform random states drawn per trial.
    Random,
}

#[derive(Debug, Clone, Copy)]
pub struct MonteCarloOptions {
    pub seed: u64,
    /// Rounds after which an unstabilised trial is censored.
    pub round_cap: usize,
    /// Consecutive counting rounds required to declare stabilisation.
    pub window: usize,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions {
            seed: 0,
            round_cap: 10_000,
            window: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    /// Derived seed of the trial, for replay.
    pub seed: u64,
    /// `None` when censored.
    pub stabilized_at: Option<usize>,
    /// Rounds in which one non-faulty node applied rule 1 and another rule 2.
    pub rule_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloStats {
    pub trials: Vec<TrialResult>,
}

impl MonteCarloStats {
    fn times(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.trials.iter().filter_map(|r| r.stabilized_at).collect();
        t.sort_unstable();
        t
    }

    pub fn censored(&self) -> usize {
        self.trials.iter().filter(|r| r.stabilized_at.is_none()).count()
    }

    /// Mean over uncensored trials.
    pub fn mean(&self) -> Option<f64> {
        let t = self.times();
        (!t.is_empty()).then(|| t.iter().sum::<usize>() as f64 / t.len() as f64)
    }

    pub fn median(&self) -> Option<f64> {
        let t = self.times();
        match t.len() {
            0 => None,
            len if len % 2 == 1 => Some(t[len / 2] as f64),
            len => Some((t[len / 2 - 1] + t[len / 2]) as f64 / 2.0),
        }
    }

    pub fn max(&self) -> Option<usize> {
        self.times().last().copied()
    }

    pub fn rule_violations(&self) -> usize {
        self.trials.iter().map(|r| r.rule_violations).sum()
    }
}

impl fmt::Display for MonteCarloStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        writeln!(f, "trials           {}", self.trials.len())?;
        writeln!(f, "censored         {}", self.censored())?;
        writeln!(f, "mean             {}", show(self.mean()))?;
        writeln!(f, "median           {}", show(self.median()))?;
        writeln!(
            f,
            "max              {}",
            self.max().map_or("-".to_string(), |m| m.to_string())
        )?;
        writeln!(f, "rule violations  {}", self.rule_violations())
    }
}

/// Runs independent trials in parallel until each stabilises (as judged by
/// `window` consecutive counting rounds) or hits the round cap.
pub fn run_monte_carlo<P: Protocol + ?Sized>(
    protocol: &P,
    adversary: Adversary,
    faults: &FaultSet,
    init: &Init,
    trials: usize,
    options: MonteCarloOptions,
) -> Result<MonteCarloStats, SimError> {
    let modulus = protocol.modulus();
    let results = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(options.seed, &[trial as u64]);
            let start = match init {
                Init::Fixed(v) => v.clone(),
                Init::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[3]));
                    (0..protocol.nodes())
                        .map(|_| rng.gen_range(0..protocol.states()))
                        .collect()
                }
            };
            let mut sim = Simulation::new(protocol, adversary, faults.clone(), &start, seed, 0)?;
            let mut rule_violations = 0;
            let mut streak_start = 0;
            let mut streak = 0usize;
            let mut last = None;
            let stabilized_at = loop {
                let out = sim.output();
                let continues = match (last, out) {
                    (Some(prev), Some(cur)) => cur == (prev + 1) % modulus,
                    _ => false,
                };
                if out.is_none() {
                    streak = 0;
                } else if continues {
                    streak += 1;
                } else {
                    streak = 1;
                    streak_start = sim.round();
                }
                last = out;
                if streak >= options.window.max(1) {
                    break Some(streak_start);
                }
                if sim.round() >= options.round_cap {
                    break None;
                }
                let rules = sim.step()?;
                if rules.contains(&Some(1)) && rules.contains(&Some(2)) {
                    rule_violations += 1;
                }
            };
            Ok(TrialResult {
                trial,
                seed,
                stabilized_at,
                rule_violations,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(MonteCarloStats { trials: results })
}

/// Monte Carlo statistics for the randomised counter.
pub fn run_randomized(
    rc: &RandomizedCounter,
    adversary: Adversary,
    faults: &FaultSet,
    init: &Init,
    trials: usize,
    options: MonteCarloOptions,
) -> Result<MonteCarloStats, SimError> {
    if faults.len() > rc.f {
        return Err(SimError::BadFaults {
            faults: faults.clone(),
            n: rc.n,
        });
    }
    run_monte_carlo(rc, adversary, faults, init, trials, options)
}

/// Searches random initial states and adversary seeds for a trace that has
/// not stabilised after `rounds` rounds.
pub fn find_unstable_trace<P: Protocol + ?Sized>(
    protocol: &P,
    faults: &FaultSet,
    attempts: usize,
    rounds: usize,
    window: usize,
    seed: u64,
) -> Result<Option<Trace>, SimError> {
    for attempt in 0..attempts {
        let s = derive_seed(seed, &[attempt as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let init: Vec<usize> = (0..protocol.nodes())
            .map(|_| rng.gen_range(0..protocol.states()))
            .collect();
        let trace = run(protocol, Adversary::Random { seed: s }, faults, &init, rounds, s)?;
        if trace.stabilization_round(window).is_none() {
            return Ok(Some(trace));
        }
    }
    Ok(None)
}
