//! Counter-example guided synthesis over a bounded unrolling.
//!
//! A single incremental SAT session holds a formula `Ψ` over
//!
//! * fault selectors `p(i)`, with the ladder `p_eq(k, i)`, `p_le(k, i)`
//!   forcing exactly `f` of them true;
//! * transition bits `a(w, i, b)`: bit `b` of node `i`'s next state after
//!   observing `w`;
//! * per timepoint `k`: observed bits `u(i, j, b, k)` (node `i` as seen by
//!   `j`), observation selectors `d(w, j, k)`, and the indicators
//!   `z(k)`, `o(k)`, `z(i, k)`, `o(i, k)`;
//! * loop markers `l(k)`, implying `x^0 = x^k` on non-faulty nodes.
//!
//! States use `B = ceil(log2 s)` bits, little-endian; bit patterns `>= s`
//! are excluded. A model of `Ψ` fixes a candidate algorithm through its `a`
//! bits; a model of `Ψ` under the candidate's `a` literals as assumptions
//! is a bad execution, and the refinement clause demands that at least one
//! transition used along it changes.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::model::{ActualConfig, Algorithm, AlgorithmClass, Execution, FaultSet, ModelError, Params};
use crate::solver::{Backend, IncrementalSolver, Limits, Lit, Model, SolveStatus, SolverError};
use crate::verifier::{self, VerificationReport, VerifyError};

#[derive(Debug, Error)]
pub enum CegarError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("unsupported parameters: {0}")]
    Unsupported(String),
    #[error("candidate accepted by the search failed independent verification:\n{0}")]
    Unsound(Box<VerificationReport>),
}

/// Number of bits per state.
pub fn state_bits(s: usize) -> usize {
    let mut bits = 0;
    while (1usize << bits) < s {
        bits += 1;
    }
    bits.max(1)
}

/// Largest stabilisation time worth searching for, `s^(n-f) - 2`.
pub fn max_time(params: &Params) -> u32 {
    params.max_useful_time().min(u32::MAX as u64) as u32
}

#[derive(Debug, Clone, Copy)]
struct Step {
    u: Lit,
    d: Lit,
    z: Lit,
    o: Lit,
    zi: Lit,
    oi: Lit,
}

/// Variable allocation and clause generation.
#[derive(Debug, Clone)]
pub struct CegarVars {
    params: Params,
    class: AlgorithmClass,
    bits: usize,
    observed: usize,
    d_converse: bool,
    next: Lit,
    p: Vec<Lit>,
    p_eq: Vec<Vec<Lit>>,
    p_le: Vec<Vec<Lit>>,
    a: Lit,
    steps: Vec<Step>,
    loops: Vec<Option<Lit>>,
}

impl CegarVars {
    pub fn new(params: Params, class: AlgorithmClass) -> Result<Self, CegarError> {
        params.validate()?;
        let n = params.n;
        let f = params.f;
        let bits = state_bits(params.s);
        let observed = params.observed_count();
        let mut next: Lit = 1;
        let mut alloc = |count: usize| {
            let first = next;
            next += count as Lit;
            first
        };
        let p = (0..n).map(|_| alloc(1)).collect();
        let p_eq = (0..f).map(|_| (0..n).map(|_| alloc(1)).collect()).collect();
        let p_le = (0..f).map(|_| (0..n).map(|_| alloc(1)).collect()).collect();
        let a_nodes = match class {
            AlgorithmClass::Cyclic => 1,
            AlgorithmClass::General => n,
        };
        let a = alloc(a_nodes * observed * bits);
        Ok(CegarVars {
            params,
            class,
            bits,
            observed,
            d_converse: false,
            next,
            p,
            p_eq,
            p_le,
            a,
            steps: Vec::new(),
            loops: Vec::new(),
        })
    }

    /// Also force `d(w, j, k)` false whenever `j` does not observe `w`.
    pub fn with_d_converse(mut self, on: bool) -> Self {
        self.d_converse = on;
        self
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn class(&self) -> AlgorithmClass {
        self.class
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn num_vars(&self) -> usize {
        (self.next - 1) as usize
    }

    /// Timepoints unrolled so far.
    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    pub fn p(&self, i: usize) -> Lit {
        self.p[i]
    }

    pub fn p_eq(&self, k: usize, i: usize) -> Lit {
        self.p_eq[k][i]
    }

    pub fn p_le(&self, k: usize, i: usize) -> Lit {
        self.p_le[k][i]
    }

    fn a_nodes(&self) -> usize {
        match self.class {
            AlgorithmClass::Cyclic => 1,
            AlgorithmClass::General => self.params.n,
        }
    }

    /// `a(w, i, b)`; for cyclic algorithms aliased to the rotation seen by
    /// node 0.
    pub fn a(&self, w: usize, i: usize, b: usize) -> Lit {
        let (w, i) = match self.class {
            AlgorithmClass::Cyclic => (self.params.space().rotate(w, i), 0),
            AlgorithmClass::General => (w, i),
        };
        self.a + ((i * self.observed + w) * self.bits + b) as Lit
    }

    /// Every stored transition bit, in id order.
    pub fn a_vars(&self) -> std::ops::Range<Lit> {
        self.a..self.a + (self.a_nodes() * self.observed * self.bits) as Lit
    }

    pub fn u(&self, i: usize, j: usize, b: usize, k: usize) -> Lit {
        let n = self.params.n;
        self.steps[k].u + ((i * n + j) * self.bits + b) as Lit
    }

    pub fn g(&self, i: usize, b: usize, k: usize) -> Lit {
        self.u(i, i, b, k)
    }

    pub fn d(&self, w: usize, j: usize, k: usize) -> Lit {
        self.steps[k].d + (j * self.observed + w) as Lit
    }

    pub fn z(&self, k: usize) -> Lit {
        self.steps[k].z
    }

    pub fn o(&self, k: usize) -> Lit {
        self.steps[k].o
    }

    pub fn z_node(&self, i: usize, k: usize) -> Lit {
        self.steps[k].zi + i as Lit
    }

    pub fn o_node(&self, i: usize, k: usize) -> Lit {
        self.steps[k].oi + i as Lit
    }

    fn alloc(&mut self, count: usize) -> Lit {
        let first = self.next;
        self.next += count as Lit;
        first
    }

    /// Clauses excluding bit patterns that encode no state.
    fn valid_state(&self, bits: &[Lit], out: &mut Vec<Vec<Lit>>) {
        for v in self.params.s..(1usize << self.bits) {
            out.push(
                bits.iter()
                    .enumerate()
                    .map(|(b, &x)| if (v >> b) & 1 == 1 { -x } else { x })
                    .collect(),
            );
        }
    }

    /// `ψ_faulty ∧ ψ_trivial` plus the state-validity clauses on `a`.
    pub fn build_base(&self) -> Vec<Vec<Lit>> {
        let n = self.params.n;
        let f = self.params.f;
        let mut out = Vec::new();
        for k in 0..f {
            for i in 0..n {
                out.push(vec![-self.p_eq(k, i), self.p_le(k, i)]);
            }
            for j in 1..n {
                out.push(vec![-self.p_le(k, j), self.p_eq(k, j), self.p_le(k, j - 1)]);
                out.push(vec![-self.p_le(k, j - 1), self.p_le(k, j)]);
                out.push(vec![-self.p_le(k, j - 1), -self.p_eq(k, j)]);
            }
            out.push(vec![self.p_eq(k, 0), -self.p_le(k, 0)]);
            out.push(vec![self.p_le(k, n - 1)]);
        }
        for h in 1..f {
            for i in 0..n {
                out.push(vec![-self.p_eq(h - 1, i), -self.p_le(h, i)]);
            }
        }
        for i in 0..n {
            for k in 0..f {
                out.push(vec![-self.p_eq(k, i), self.p(i)]);
            }
            let mut c = vec![-self.p(i)];
            c.extend((0..f).map(|k| self.p_eq(k, i)));
            out.push(c);
        }

        let space = self.params.space();
        let zeros = space.uniform(0);
        let ones = space.uniform(1);
        for i in 0..self.a_nodes() {
            for w in 0..self.observed {
                let bits: Vec<Lit> = (0..self.bits).map(|b| self.a(w, i, b)).collect();
                self.valid_state(&bits, &mut out);
            }
        }
        for i in 0..n {
            out.push(vec![self.a(zeros, i, 0)]);
            for b in 1..self.bits {
                out.push(vec![-self.a(zeros, i, b)]);
            }
            for b in 0..self.bits {
                out.push(vec![-self.a(ones, i, b)]);
            }
        }
        dedup_clauses(out)
    }

    /// Allocates timepoint `k = depth()` and returns `τ_k`.
    pub fn build_tau(&mut self) -> Vec<Vec<Lit>> {
        let n = self.params.n;
        let bits = self.bits;
        let k = self.steps.len();
        let step = Step {
            u: self.alloc(n * n * bits),
            d: self.alloc(n * self.observed),
            z: self.alloc(1),
            o: self.alloc(1),
            zi: self.alloc(n),
            oi: self.alloc(n),
        };
        self.steps.push(step);
        self.loops.push(None);

        let space = self.params.space();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let obs: Vec<Lit> = (0..bits).map(|b| self.u(i, j, b, k)).collect();
                self.valid_state(&obs, &mut out);
                if i != j {
                    for b in 0..bits {
                        let (u, g) = (self.u(i, j, b, k), self.g(i, b, k));
                        out.push(vec![self.p(i), -u, g]);
                        out.push(vec![self.p(i), u, -g]);
                    }
                }
            }
        }
        let mut digits = vec![0u8; n];
        for w in 0..self.observed {
            space.write_digits(w, &mut digits);
            for j in 0..n {
                let d = self.d(w, j, k);
                let mut clause = vec![d];
                for (i, &state) in digits.iter().enumerate() {
                    for b in 0..bits {
                        let u = self.u(i, j, b, k);
                        let lit = if (state >> b) & 1 == 1 { -u } else { u };
                        clause.push(lit);
                        if self.d_converse {
                            out.push(vec![-d, -lit]);
                        }
                    }
                }
                out.push(clause);
                if k > 0 {
                    let prev = self.d(w, j, k - 1);
                    for b in 0..bits {
                        let (g, a) = (self.g(j, b, k), self.a(w, j, b));
                        out.push(vec![-prev, -g, a]);
                        out.push(vec![-prev, g, -a]);
                    }
                }
            }
        }

        let (z, o) = (self.z(k), self.o(k));
        let mut not_all_z = vec![z];
        let mut not_all_o = vec![o];
        for i in 0..n {
            let (zi, oi, p) = (self.z_node(i, k), self.o_node(i, k), self.p(i));
            out.push(vec![-z, zi]);
            out.push(vec![-o, oi]);
            not_all_z.push(-zi);
            not_all_o.push(-oi);
            out.push(vec![-p, zi]);
            out.push(vec![-p, oi]);
            let mut some_bit = vec![zi];
            for b in 0..bits {
                let g = self.g(i, b, k);
                out.push(vec![-zi, p, -g]);
                some_bit.push(g);
            }
            out.push(some_bit);
            out.push(vec![-oi, p, self.g(i, 0, k)]);
            let mut not_one = vec![oi, -self.g(i, 0, k)];
            for b in 1..bits {
                let g = self.g(i, b, k);
                out.push(vec![-oi, p, -g]);
                not_one.push(g);
            }
            out.push(not_one);
        }
        out.push(not_all_z);
        out.push(not_all_o);
        out
    }

    /// The marker `l(k)` with its defining clauses, allocated on first use.
    /// The second component is empty when the marker already exists.
    pub fn loop_var(&mut self, k: usize) -> (Lit, Vec<Vec<Lit>>) {
        assert!(k > 0 && k < self.steps.len(), "loop length {k} not unrolled");
        if let Some(l) = self.loops[k] {
            return (l, Vec::new());
        }
        let l = self.alloc(1);
        self.loops[k] = Some(l);
        let mut out = Vec::new();
        for i in 0..self.params.n {
            for b in 0..self.bits {
                let (g0, gk) = (self.g(i, b, 0), self.g(i, b, k));
                out.push(vec![-l, self.p(i), -g0, gk]);
                out.push(vec![-l, self.p(i), g0, -gk]);
            }
        }
        (l, out)
    }

    /// `Γ(ρ)`: the candidate's transition bits as literals.
    pub fn gamma(&self, model: &Model) -> Vec<Lit> {
        self.a_vars()
            .map(|v| if model.value(v) { v } else { -v })
            .collect()
    }

    /// `A(ρ)` with the given stabilisation bound.
    pub fn decode_algorithm(&self, model: &Model, t: u32) -> Result<Algorithm, CegarError> {
        let params = self.params.with_t(t)?;
        let tables: Vec<Vec<u8>> = (0..self.a_nodes())
            .map(|i| {
                (0..self.observed)
                    .map(|w| self.read_state((0..self.bits).map(|b| self.a(w, i, b)), model))
                    .collect()
            })
            .collect();
        let alg = match self.class {
            AlgorithmClass::Cyclic => Algorithm::cyclic(params, tables.into_iter().next().expect("one table")),
            AlgorithmClass::General => Algorithm::general(params, tables),
        }?;
        Ok(alg)
    }

    fn read_state(&self, bits: impl Iterator<Item = Lit>, model: &Model) -> u8 {
        bits.enumerate()
            .fold(0u8, |acc, (b, v)| acc | ((model.value(v) as u8) << b))
    }

    /// `F(σ)`.
    pub fn decode_faults(&self, model: &Model) -> FaultSet {
        let members = (0..self.params.n).filter(|&i| model.value(self.p(i))).collect();
        FaultSet::new(members, self.params.n).expect("distinct in-range nodes")
    }

    /// `X(σ)` over timepoints `0..=k`.
    pub fn decode_execution(&self, model: &Model, k: usize) -> Execution {
        let faults = self.decode_faults(model);
        let s = self.params.s;
        let configs = (0..=k)
            .map(|t| {
                let entries = (0..self.params.n)
                    .map(|i| {
                        (!faults.contains(i)).then(|| {
                            self.read_state((0..self.bits).map(|b| self.g(i, b, t)), model)
                        })
                    })
                    .collect();
                ActualConfig::new(entries, s).expect("valid states")
            })
            .collect();
        Execution { faults, configs }
    }

    /// Index of the configuration node `j` observes at timepoint `k`.
    pub fn observed_by(&self, model: &Model, j: usize, k: usize) -> usize {
        let digits: Vec<u8> = (0..self.params.n)
            .map(|i| self.read_state((0..self.bits).map(|b| self.u(i, j, b, k)), model))
            .collect();
        self.params.space().index(&digits)
    }

    /// `ψ_forbid(σ, k)`: some transition bit used by a non-faulty node at a
    /// timepoint `j < k` must flip. `None` if no such bit exists, which
    /// means the formula has become unsatisfiable.
    pub fn forbid(&self, model: &Model, k: usize) -> Option<Vec<Lit>> {
        let faults = self.decode_faults(model);
        let mut lits = BTreeSet::new();
        for i in (0..self.params.n).filter(|&i| !faults.contains(i)) {
            for j in 0..k {
                let w = self.observed_by(model, i, j);
                for b in 0..self.bits {
                    let v = self.a(w, i, b);
                    lits.insert(if model.value(v) { -v } else { v });
                }
            }
        }
        (!lits.is_empty()).then(|| lits.into_iter().collect())
    }
}

fn dedup_clauses(clauses: Vec<Vec<Lit>>) -> Vec<Vec<Lit>> {
    let mut seen = BTreeSet::new();
    clauses
        .into_iter()
        .filter(|c| {
            let mut key = c.clone();
            key.sort_unstable();
            seen.insert(key)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Basic,
    ShortLoop,
    Overshoot,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "basic" => Ok(Variant::Basic),
            "shortloop" => Ok(Variant::ShortLoop),
            "overshoot" => Ok(Variant::Overshoot),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CegarOptions {
    pub backend: Backend,
    pub seed: Option<u64>,
    /// Wall-clock budget for the whole search.
    pub time_limit: Option<Duration>,
    pub d_converse: bool,
    /// Overshoot only: stop as soon as an algorithm with at most this
    /// stabilisation time has been found.
    pub stop_at: Option<u32>,
}

impl Default for CegarOptions {
    fn default() -> Self {
        CegarOptions {
            backend: Backend::InProcess,
            seed: None,
            time_limit: None,
            d_converse: false,
            stop_at: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementKind {
    /// Step-1 transitions leaving a good configuration wrongly.
    Illegal,
    Loop,
    Path,
}

#[derive(Debug, Clone)]
pub enum CegarEvent {
    Refined {
        kind: RefinementKind,
        k: usize,
        clause_len: usize,
        refinements: u64,
    },
    Unrolled {
        k: usize,
        clauses: usize,
    },
    /// A verified algorithm stabilising in `t` rounds.
    Found {
        algorithm: Algorithm,
        t: u32,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CegarStats {
    pub candidates: u64,
    pub refinements: u64,
    pub solves: u64,
    pub clauses: usize,
    pub vars: usize,
    pub unrolled: usize,
    pub wall: Duration,
}

#[derive(Debug, Clone)]
pub struct CegarResult {
    /// Best verified algorithm and its bound.
    pub best: Option<(Algorithm, u32)>,
    /// Bound for which the search proved that no algorithm exists.
    pub unrealizable_at: Option<u32>,
    /// Set when the search stopped on its time limit.
    pub timed_out: bool,
    pub stats: CegarStats,
}

impl CegarResult {
    pub fn achieved_t(&self) -> Option<u32> {
        self.best.as_ref().map(|(_, t)| *t)
    }
}

struct Search<'a> {
    vars: CegarVars,
    session: Box<dyn IncrementalSolver>,
    deadline: Option<Instant>,
    stats: CegarStats,
    on_event: &'a mut dyn FnMut(&CegarEvent),
    start: Instant,
}

enum Query {
    Sat(Model),
    Unsat,
}

struct TimedOut;

impl<'a> Search<'a> {
    fn new(
        params: Params,
        class: AlgorithmClass,
        options: &CegarOptions,
        on_event: &'a mut dyn FnMut(&CegarEvent),
    ) -> Result<Self, CegarError> {
        if params.f > 0 && params.n < params.f + 2 {
            return Err(CegarError::Unsupported(format!(
                "exactly-f fault selection needs n >= f + 2 (n={}, f={})",
                params.n, params.f
            )));
        }
        let vars = CegarVars::new(params, class)?.with_d_converse(options.d_converse);
        let start = Instant::now();
        let mut search = Search {
            vars,
            session: options.backend.session(options.seed),
            deadline: options.time_limit.map(|t| start + t),
            stats: CegarStats::default(),
            on_event,
            start,
        };
        let base = search.vars.build_base();
        search.add(&base)?;
        Ok(search)
    }

    fn add(&mut self, clauses: &[Vec<Lit>]) -> Result<(), CegarError> {
        for c in clauses {
            self.session.add_clause(c)?;
        }
        self.stats.clauses = self.session.num_clauses();
        self.stats.vars = self.vars.num_vars();
        Ok(())
    }

    fn unroll(&mut self) -> Result<(), CegarError> {
        let tau = self.vars.build_tau();
        self.add(&tau)?;
        self.stats.unrolled = self.vars.depth() - 1;
        (self.on_event)(&CegarEvent::Unrolled {
            k: self.vars.depth() - 1,
            clauses: self.stats.clauses,
        });
        Ok(())
    }

    fn unroll_to(&mut self, k: usize) -> Result<(), CegarError> {
        while self.vars.depth() <= k {
            self.unroll()?;
        }
        Ok(())
    }

    fn query(&mut self, assumptions: &[Lit]) -> Result<Result<Query, TimedOut>, CegarError> {
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Ok(Err(TimedOut));
        }
        self.session.set_limits(Limits::unlimited().until(self.deadline));
        self.stats.solves += 1;
        let r = self.session.solve_under(assumptions)?;
        Ok(match r.status {
            SolveStatus::Sat => Ok(Query::Sat(r.model.expect("sat carries a model"))),
            SolveStatus::Unsat => Ok(Query::Unsat),
            SolveStatus::Unknown(_) => Err(TimedOut),
        })
    }

    /// Adds `ψ_forbid(σ, k)`; returns false when it is empty.
    fn refine(&mut self, model: &Model, k: usize, kind: RefinementKind) -> Result<bool, CegarError> {
        match self.vars.forbid(model, k) {
            None => Ok(false),
            Some(clause) => {
                self.session.add_clause(&clause)?;
                self.stats.refinements += 1;
                self.stats.clauses = self.session.num_clauses();
                (self.on_event)(&CegarEvent::Refined {
                    kind,
                    k,
                    clause_len: clause.len(),
                    refinements: self.stats.refinements,
                });
                Ok(true)
            }
        }
    }

    /// Step 2: remove candidates that leave `0_F` or `1_F` wrongly.
    fn eliminate_illegal(&mut self) -> Result<Result<bool, TimedOut>, CegarError> {
        let (z0, o0, z1, o1) = (self.vars.z(0), self.vars.o(0), self.vars.z(1), self.vars.o(1));
        'outer: loop {
            for assumptions in [[z0, -o1], [o0, -z1]] {
                match self.query(&assumptions)? {
                    Err(t) => return Ok(Err(t)),
                    Ok(Query::Sat(rho)) => {
                        if !self.refine(&rho, 1, RefinementKind::Illegal)? {
                            return Ok(Ok(false));
                        }
                        continue 'outer;
                    }
                    Ok(Query::Unsat) => {}
                }
            }
            return Ok(Ok(true));
        }
    }

    /// Smallest `j` in `1..=k` with a bad loop `x^0 = x^j` for the
    /// candidate.
    fn find_loop(
        &mut self,
        gamma: &[Lit],
        k: usize,
    ) -> Result<Result<Option<(usize, Model)>, TimedOut>, CegarError> {
        let (z0, o0) = (self.vars.z(0), self.vars.o(0));
        for j in 1..=k {
            let (l, clauses) = self.vars.loop_var(j);
            self.add(&clauses)?;
            let mut assumptions = gamma.to_vec();
            assumptions.extend([l, -z0, -o0]);
            match self.query(&assumptions)? {
                Err(t) => return Ok(Err(t)),
                Ok(Query::Sat(sigma)) => return Ok(Ok(Some((j, sigma)))),
                Ok(Query::Unsat) => {}
            }
        }
        Ok(Ok(None))
    }

    /// A bad execution of length `k` for the candidate.
    fn find_path(&mut self, gamma: &[Lit], k: usize) -> Result<Result<Option<Model>, TimedOut>, CegarError> {
        let mut assumptions = gamma.to_vec();
        assumptions.extend([-self.vars.z(k), -self.vars.o(k)]);
        Ok(self.query(&assumptions)?.map(|q| match q {
            Query::Sat(m) => Some(m),
            Query::Unsat => None,
        }))
    }

    fn accept(&mut self, rho: &Model, t: u32) -> Result<Algorithm, CegarError> {
        let alg = self.vars.decode_algorithm(rho, t)?;
        let report = verifier::check_stabilization(&alg, t)?;
        if !report.stabilizes() {
            return Err(CegarError::Unsound(Box::new(report)));
        }
        (self.on_event)(&CegarEvent::Found {
            algorithm: alg.clone(),
            t,
        });
        Ok(alg)
    }

    fn finish(
        mut self,
        best: Option<(Algorithm, u32)>,
        unrealizable_at: Option<u32>,
        timed_out: bool,
    ) -> CegarResult {
        self.stats.wall = self.start.elapsed();
        CegarResult {
            best,
            unrealizable_at,
            timed_out,
            stats: self.stats,
        }
    }
}

macro_rules! or_timeout {
    ($search:expr, $best:expr, $e:expr) => {
        match $e? {
            Ok(v) => v,
            Err(TimedOut) => return Ok($search.finish($best, None, true)),
        }
    };
}

/// Fixed-horizon search; with `short_loops` each candidate is first
/// checked for bad loops of length at most `t`.
fn run_fixed(
    params: Params,
    class: AlgorithmClass,
    short_loops: bool,
    options: &CegarOptions,
    on_event: &mut dyn FnMut(&CegarEvent),
) -> Result<CegarResult, CegarError> {
    let t = params.t;
    let mut search = Search::new(params, class, options, on_event)?;
    search.unroll_to(1)?;
    if !or_timeout!(search, None, search.eliminate_illegal()) {
        return Ok(search.finish(None, Some(t), false));
    }
    search.unroll_to(t as usize)?;
    loop {
        let rho = match or_timeout!(search, None, search.query(&[])) {
            Query::Sat(m) => m,
            Query::Unsat => return Ok(search.finish(None, Some(t), false)),
        };
        search.stats.candidates += 1;
        let gamma = search.vars.gamma(&rho);
        if short_loops {
            if let Some((j, sigma)) = or_timeout!(search, None, search.find_loop(&gamma, t as usize)) {
                if !search.refine(&sigma, j, RefinementKind::Loop)? {
                    return Ok(search.finish(None, Some(t), false));
                }
                continue;
            }
        }
        match or_timeout!(search, None, search.find_path(&gamma, t as usize)) {
            Some(sigma) => {
                if !search.refine(&sigma, t as usize, RefinementKind::Path)? {
                    return Ok(search.finish(None, Some(t), false));
                }
            }
            None => {
                let alg = search.accept(&rho, t)?;
                return Ok(search.finish(Some((alg, t)), None, false));
            }
        }
    }
}

/// Guess a candidate, look for a bad execution of length `t`, refine.
pub fn run_basic(
    params: Params,
    class: AlgorithmClass,
    options: &CegarOptions,
    on_event: &mut dyn FnMut(&CegarEvent),
) -> Result<CegarResult, CegarError> {
    run_fixed(params, class, false, options, on_event)
}

/// As [`run_basic`], refining with the shortest bad loop when one exists.
pub fn run_shortloop(
    params: Params,
    class: AlgorithmClass,
    options: &CegarOptions,
    on_event: &mut dyn FnMut(&CegarEvent),
) -> Result<CegarResult, CegarError> {
    run_fixed(params, class, true, options, on_event)
}

/// Unrolls on demand up to `t_target` (default `s^(n-f) - 2`), then keeps
/// tightening the bound after each verified algorithm. `params.t` is
/// ignored.
pub fn run_overshoot(
    params: Params,
    class: AlgorithmClass,
    t_target: Option<u32>,
    options: &CegarOptions,
    on_event: &mut dyn FnMut(&CegarEvent),
) -> Result<CegarResult, CegarError> {
    let t_max = max_time(&params);
    let mut t = t_target.unwrap_or(t_max);
    if t > t_max {
        return Err(CegarError::Unsupported(format!(
            "target {t} exceeds the maximal useful bound {t_max}"
        )));
    }
    if t == 0 {
        // Unrolling starts at depth 1, so bound 0 is a plain fixed-bound query.
        return run_basic(params.with_t(0)?, class, options, on_event);
    }
    let mut search = Search::new(params, class, options, on_event)?;
    search.unroll_to(1)?;
    let mut best: Option<(Algorithm, u32)> = None;
    if !or_timeout!(search, best, search.eliminate_illegal()) {
        return Ok(search.finish(best, Some(t), false));
    }
    let mut k: usize = 1;
    let z0 = search.vars.z(0);
    loop {
        let rho = match or_timeout!(search, best, search.query(&[z0])) {
            Query::Sat(m) => m,
            Query::Unsat => return Ok(search.finish(best, Some(t), false)),
        };
        search.stats.candidates += 1;
        let gamma = search.vars.gamma(&rho);
        let mut check_loops = true;
        loop {
            if check_loops {
                if let Some((j, sigma)) = or_timeout!(search, best, search.find_loop(&gamma, k)) {
                    if !search.refine(&sigma, j, RefinementKind::Loop)? {
                        return Ok(search.finish(best, Some(t), false));
                    }
                    break;
                }
            }
            match or_timeout!(search, best, search.find_path(&gamma, k)) {
                Some(pi) => {
                    if (k as u32) < t {
                        k += 1;
                        search.unroll_to(k)?;
                        check_loops = true;
                        continue;
                    }
                    if !search.refine(&pi, k, RefinementKind::Path)? {
                        return Ok(search.finish(best, Some(t), false));
                    }
                    break;
                }
                None => {
                    let achieved = k as u32;
                    let alg = search.accept(&rho, achieved)?;
                    best = Some((alg, achieved));
                    if achieved == 0 || options.stop_at.is_some_and(|s| achieved <= s) {
                        return Ok(search.finish(best, None, false));
                    }
                    k -= 1;
                    t = k as u32;
                    check_loops = false;
                }
            }
        }
    }
}

/// Dispatches on the variant. `t` is `None` for an unbounded overshoot.
pub fn run(
    variant: Variant,
    params: Params,
    class: AlgorithmClass,
    t: Option<u32>,
    options: &CegarOptions,
    on_event: &mut dyn FnMut(&CegarEvent),
) -> Result<CegarResult, CegarError> {
    match variant {
        Variant::Overshoot => run_overshoot(params, class, t, options, on_event),
        Variant::Basic | Variant::ShortLoop => {
            let t = t.ok_or_else(|| {
                CegarError::Unsupported("basic and shortloop need a finite bound".into())
            })?;
            let params = params.with_t(t)?;
            if variant == Variant::Basic {
                run_basic(params, class, options, on_event)
            } else {
                run_shortloop(params, class, options, on_event)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use crate::solver::CadicalSession;

    fn session_with(clauses: &[Vec<Lit>]) -> CadicalSession {
        let mut s = CadicalSession::new();
        for c in clauses {
            s.add_clause(c).unwrap();
        }
        s
    }

    /// Enumerates models projected onto `vars` by blocking each one.
    fn count_projected(clauses: &[Vec<Lit>], vars: &[Lit]) -> usize {
        let mut s = session_with(clauses);
        let mut count = 0;
        while let Some(m) = s.solve().unwrap().model {
            count += 1;
            let block: Vec<Lit> = vars.iter().map(|&v| if m.value(v) { -v } else { v }).collect();
            s.add_clause(&block).unwrap();
        }
        count
    }

    #[test]
    fn bits_per_state() {
        assert_eq!(state_bits(2), 1);
        assert_eq!(state_bits(3), 2);
        assert_eq!(state_bits(4), 2);
        assert_eq!(state_bits(5), 3);
    }

    #[test]
    fn exactly_f_faulty() {
        for (n, f, expected) in [(4, 1, 4), (5, 2, 10), (5, 0, 1), (6, 3, 20)] {
            let vars = CegarVars::new(Params::new(n, f, 2, 3).unwrap(), AlgorithmClass::General).unwrap();
            let ps: Vec<Lit> = (0..n).map(|i| vars.p(i)).collect();
            let base = vars.build_base();
            assert_eq!(count_projected(&base, &ps), expected, "n={n} f={f}");
            let mut s = session_with(&base);
            for _ in 0..expected.min(5) {
                let m = s.solve().unwrap().model.unwrap();
                assert_eq!(ps.iter().filter(|&&p| m.value(p)).count(), f);
                for k in 1..f {
                    let pos = |k: usize| (0..n).find(|&i| m.value(vars.p_eq(k, i))).unwrap();
                    assert!(pos(k - 1) < pos(k));
                }
                let block: Vec<Lit> = ps.iter().map(|&v| if m.value(v) { -v } else { v }).collect();
                s.add_clause(&block).unwrap();
            }
        }
    }

    #[test]
    fn trivial_transitions_pinned() {
        let vars = CegarVars::new(Params::new(6, 1, 2, 3).unwrap(), AlgorithmClass::General).unwrap();
        let base = vars.build_base();
        let units: Vec<&Vec<Lit>> = base
            .iter()
            .filter(|c| c.len() == 1 && vars.a_vars().contains(&c[0].abs()))
            .collect();
        assert_eq!(units.len(), 12);

        let vars = CegarVars::new(Params::new(4, 1, 3, 3).unwrap(), AlgorithmClass::General).unwrap();
        let m = session_with(&vars.build_base()).solve().unwrap().model.unwrap();
        let alg = vars.decode_algorithm(&m, 3).unwrap();
        let space = vars.params().space();
        for i in 0..4 {
            assert_eq!(alg.transition_index(i, space.uniform(0)), 1);
            assert_eq!(alg.transition_index(i, space.uniform(1)), 0);
        }
        // pattern 11 is forbidden everywhere
        assert!(alg.tables().iter().flatten().all(|&v| v < 3));
    }

    #[test]
    fn indicators_follow_states() {
        let params = Params::new(4, 1, 3, 3).unwrap();
        let mut vars = CegarVars::new(params, AlgorithmClass::General).unwrap();
        let mut clauses = vars.build_base();
        clauses.extend(vars.build_tau());
        let mut s = session_with(&clauses);
        // node 3 faulty, nodes 0..3 in state 0
        let mut assumptions = vec![vars.p(3)];
        for i in 0..3 {
            for b in 0..2 {
                assumptions.push(-vars.g(i, b, 0));
            }
        }
        let m = s.solve_under(&assumptions).unwrap().model.unwrap();
        assert!(m.value(vars.z(0)));
        assert!(!m.value(vars.o(0)));
        // node 1 in state 1 (bits 10)
        assumptions[3] = vars.g(1, 0, 0);
        let m = s.solve_under(&assumptions).unwrap().model.unwrap();
        assert!(!m.value(vars.z(0)));
        assert!(!m.value(vars.o(0)));
        assert!(m.value(vars.o_node(1, 0)));
        assert!(!m.value(vars.o_node(0, 0)));
    }

    #[test]
    fn decoded_executions_replay() {
        let alg = reference::table4();
        let params = *alg.params();
        let mut vars = CegarVars::new(params, AlgorithmClass::Cyclic).unwrap();
        let mut clauses = vars.build_base();
        for _ in 0..=6 {
            clauses.extend(vars.build_tau());
        }
        let mut s = session_with(&clauses);
        let gamma: Vec<Lit> = (0..81)
            .flat_map(|w| {
                let state = alg.transition_index(0, w);
                (0..2).map(move |b| (w, b, (state >> b) & 1 == 1))
            })
            .map(|(w, b, on)| if on { vars.a(w, 0, b) } else { -vars.a(w, 0, b) })
            .collect();
        let mut assumptions = gamma.clone();
        assumptions.extend([-vars.z(6), -vars.o(6)]);
        let m = s.solve_under(&assumptions).unwrap().model.unwrap();
        let x = vars.decode_execution(&m, 6);
        assert_eq!(x.faults.len(), 1);
        assert!(verifier::replays(&alg, &x).unwrap());
        assert!(x.configs.iter().all(|c| {
            let space = crate::model::ActualSpace::new(4, 3, x.faults.clone());
            let idx = space.index_of(c).unwrap();
            idx != space.zero_index() && idx != space.one_index()
        }));
        // stabilises in 7: no bad execution of that length
        let mut clauses7 = Vec::new();
        clauses7.extend(vars.build_tau());
        for c in &clauses7 {
            s.add_clause(c).unwrap();
        }
        let mut assumptions = gamma;
        assumptions.extend([-vars.z(7), -vars.o(7)]);
        assert!(s.solve_under(&assumptions).unwrap().is_unsat());
    }

    #[test]
    fn forbid_flips_a_used_transition() {
        let params = Params::new(4, 1, 2, 2).unwrap();
        let mut vars = CegarVars::new(params, AlgorithmClass::General).unwrap();
        let mut clauses = vars.build_base();
        for _ in 0..=2 {
            clauses.extend(vars.build_tau());
        }
        let mut s = session_with(&clauses);
        let sigma = s.solve_under(&[-vars.z(2), -vars.o(2)]).unwrap().model.unwrap();
        let clause = vars.forbid(&sigma, 2).unwrap();
        assert!(!sigma.satisfies(&clause));
        assert!(clause.len() <= 3 * 2);
        s.add_clause(&clause).unwrap();
        let gamma = vars.gamma(&sigma);
        let restricted: Vec<Lit> = gamma
            .into_iter()
            .filter(|l| clause.contains(&-l))
            .collect();
        assert!(s.solve_under(&restricted).unwrap().is_unsat());
    }

    #[test]
    fn identity_has_self_loop() {
        let params = Params::new(4, 1, 2, 3).unwrap();
        let alg = reference::identity(params);
        let mut vars = CegarVars::new(params, AlgorithmClass::General).unwrap();
        let mut clauses = Vec::new();
        for _ in 0..=3 {
            clauses.extend(vars.build_tau());
        }
        // no base: the identity violates the trivial transitions
        let mut fault = vars.build_base();
        fault.retain(|c| !c.iter().any(|l| vars.a_vars().contains(&l.abs())));
        clauses.extend(fault);
        let (l1, lc) = vars.loop_var(1);
        clauses.extend(lc);
        let mut s = session_with(&clauses);
        let gamma: Vec<Lit> = (0..4)
            .flat_map(|i| (0..16).map(move |w| (i, w)))
            .map(|(i, w)| {
                let v = vars.a(w, i, 0);
                if alg.transition_index(i, w) == 1 {
                    v
                } else {
                    -v
                }
            })
            .collect();
        let mut assumptions = gamma;
        assumptions.extend([l1, -vars.z(0), -vars.o(0)]);
        let m = s.solve_under(&assumptions).unwrap().model.unwrap();
        let x = vars.decode_execution(&m, 1);
        assert_eq!(x.configs[0], x.configs[1]);
    }

    #[test]
    fn flip_is_found_quickly() {
        let params = Params::new(1, 0, 2, 0).unwrap();
        for variant in [Variant::Basic, Variant::ShortLoop, Variant::Overshoot] {
            let mut solves = 0;
            let r = run(variant, params, AlgorithmClass::General, Some(0), &CegarOptions::default(), &mut |_| {})
                .unwrap();
            solves += r.stats.solves;
            let (alg, t) = r.best.unwrap();
            assert_eq!(t, 0);
            assert_eq!(alg.tables(), reference::flip().tables());
            assert!(solves <= 6, "{variant:?}: {solves}");
        }
    }

    #[test]
    fn follow_the_leader_params() {
        let params = Params::new(2, 0, 2, 1).unwrap();
        for variant in [Variant::Basic, Variant::ShortLoop] {
            let r = run(variant, params, AlgorithmClass::General, Some(1), &CegarOptions::default(), &mut |_| {})
                .unwrap();
            assert_eq!(r.achieved_t(), Some(1));
        }
        let r = run(Variant::Basic, params, AlgorithmClass::General, Some(0), &CegarOptions::default(), &mut |_| {})
            .unwrap();
        assert_eq!(r.unrealizable_at, Some(0));
    }

    #[test]
    fn exactly_f_needs_two_spare_nodes() {
        let params = Params::new(2, 1, 2, 2).unwrap();
        assert!(matches!(
            run_basic(params, AlgorithmClass::General, &CegarOptions::default(), &mut |_| {}),
            Err(CegarError::Unsupported(_))
        ));
    }

    #[test]
    fn general_4_1_2_is_unrealizable() {
        let params = Params::new(4, 1, 2, 6).unwrap();
        let r = run_overshoot(params, AlgorithmClass::General, Some(6), &CegarOptions::default(), &mut |_| {})
            .unwrap();
        assert!(r.best.is_none());
        assert_eq!(r.unrealizable_at, Some(6));
    }

    #[test]
    fn d_converse_keeps_verdicts() {
        let params = Params::new(2, 0, 2, 1).unwrap();
        for converse in [false, true] {
            let opts = CegarOptions {
                d_converse: converse,
                ..CegarOptions::default()
            };
            let ok = run_shortloop(params, AlgorithmClass::General, &opts, &mut |_| {}).unwrap();
            assert_eq!(ok.achieved_t(), Some(1));
            let bad = run_shortloop(params.with_t(0).unwrap(), AlgorithmClass::General, &opts, &mut |_| {})
                .unwrap();
            assert_eq!(bad.unrealizable_at, Some(0));
        }
    }

    #[test]
    fn time_limit_is_honoured() {
        let params = Params::new(4, 1, 3, 6).unwrap();
        let opts = CegarOptions {
            time_limit: Some(Duration::from_millis(200)),
            ..CegarOptions::default()
        };
        let start = Instant::now();
        let r = run_shortloop(params, AlgorithmClass::Cyclic, &opts, &mut |_| {}).unwrap();
        assert!(r.timed_out || r.unrealizable_at.is_some());
        assert!(start.elapsed() < Duration::from_secs(10));
    }
}
