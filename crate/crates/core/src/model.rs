//! Algorithms, configurations and projections.
//!
//! Observed configurations are vectors in `[s]^n`. They are indexed by their
//! base-`s` little-endian value: node 0 is the least significant digit. A
//! transition table for node `i` is therefore a flat array of length `s^n`
//! whose entry `j` is the new state of node `i` after observing the
//! configuration with index `j`.
//!
//! Actual configurations replace the entries of faulty nodes by `*`. In packed
//! form `*` is stored as the sentinel value `s`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// The counter modulus. Larger moduli are obtained by layering 2-counters.
pub const MODULUS: usize = 2;

/// Largest supported number of states per node.
pub const MAX_STATES: usize = 64;

const FILE_MAGIC: &str = "counting-algorithm v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("node index {index} out of range for n={n}")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("state {state} out of range for s={s}")]
    StateOutOfRange { state: usize, s: usize },
    #[error("configuration has length {got}, expected {expected}")]
    WrongLength { got: usize, expected: usize },
    #[error("invalid fault set: {0}")]
    InvalidFaultSet(String),
    #[error("configuration does not match fault set {0}")]
    FaultMismatch(FaultSet),
    #[error("configuration space too large: {0}")]
    TooLarge(String),
    #[error("malformed algorithm file: {0}")]
    Parse(String),
}

/// Problem parameters: `n` nodes, at most `f` faulty, `s` states per node,
/// stabilisation within `t` rounds, and optionally a tighter bound `t0` for
/// executions without faults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Params {
    pub n: usize,
    pub f: usize,
    pub s: usize,
    pub t: u32,
    pub t0: Option<u32>,
}

impl Params {
    pub fn new(n: usize, f: usize, s: usize, t: u32) -> Result<Self, ModelError> {
        let params = Params {
            n,
            f,
            s,
            t,
            t0: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_t0(mut self, t0: u32) -> Result<Self, ModelError> {
        self.t0 = Some(t0);
        self.validate()?;
        Ok(self)
    }

    pub fn with_t(mut self, t: u32) -> Result<Self, ModelError> {
        self.t = t;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n == 0 {
            return Err(ModelError::InvalidParams("n must be at least 1".into()));
        }
        if self.f >= self.n {
            return Err(ModelError::InvalidParams(format!(
                "f={} must be smaller than n={}",
                self.f, self.n
            )));
        }
        if self.s < 2 || self.s > MAX_STATES {
            return Err(ModelError::InvalidParams(format!(
                "s={} must lie in [2, {MAX_STATES}]",
                self.s
            )));
        }
        if let Some(t0) = self.t0 {
            if t0 > self.t {
                return Err(ModelError::InvalidParams(format!(
                    "t0={t0} exceeds t={}",
                    self.t
                )));
            }
        }
        checked_pow(self.s, self.n).ok_or_else(|| {
            ModelError::TooLarge(format!("s^n = {}^{} overflows", self.s, self.n))
        })?;
        Ok(())
    }

    /// Number of observed configurations, `s^n`.
    pub fn observed_count(&self) -> usize {
        self.s.pow(self.n as u32)
    }

    /// Number of actual configurations for a fault set of the given size.
    pub fn actual_count(&self, faulty: usize) -> usize {
        self.s.pow((self.n - faulty) as u32)
    }

    /// The largest stabilisation time worth asking for, `s^(n-f) - 2`.
    pub fn max_useful_time(&self) -> u64 {
        (self.s as u64).pow((self.n - self.f) as u32).saturating_sub(2)
    }

    pub fn space(&self) -> ConfigSpace {
        ConfigSpace::new(self.n, self.s)
    }
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Base-`s` little-endian indexing of `[s]^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigSpace {
    pub n: usize,
    pub s: usize,
}

impl ConfigSpace {
    pub fn new(n: usize, s: usize) -> Self {
        ConfigSpace { n, s }
    }

    pub fn size(&self) -> usize {
        self.s.pow(self.n as u32)
    }

    pub fn index(&self, digits: &[u8]) -> usize {
        digits
            .iter()
            .rev()
            .fold(0usize, |acc, &d| acc * self.s + d as usize)
    }

    pub fn digits(&self, mut index: usize) -> Vec<u8> {
        let mut out = vec![0u8; self.n];
        for d in out.iter_mut() {
            *d = (index % self.s) as u8;
            index /= self.s;
        }
        out
    }

    pub fn write_digits(&self, mut index: usize, out: &mut [u8]) {
        for d in out.iter_mut() {
            *d = (index % self.s) as u8;
            index /= self.s;
        }
    }

    pub fn digit(&self, index: usize, position: usize) -> u8 {
        ((index / self.s.pow(position as u32)) % self.s) as u8
    }

    /// Index of `(u_r, u_{r+1}, ..., u_{r-1})`, the configuration rotated so
    /// that position `r` comes first.
    pub fn rotate(&self, index: usize, r: usize) -> usize {
        let r = r % self.n;
        if r == 0 {
            return index;
        }
        let low = self.s.pow(r as u32);
        let high = self.s.pow((self.n - r) as u32);
        index / low + (index % low) * high
    }

    /// Index of the configuration with every node in state `state`.
    pub fn uniform(&self, state: u8) -> usize {
        (0..self.n).fold(0usize, |acc, _| acc * self.s + state as usize)
    }
}

/// A full observed configuration `u ∈ [s]^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObservedConfig(Vec<u8>);

impl ObservedConfig {
    pub fn new(entries: Vec<u8>, s: usize) -> Result<Self, ModelError> {
        if let Some(&bad) = entries.iter().find(|&&e| e as usize >= s) {
            return Err(ModelError::StateOutOfRange {
                state: bad as usize,
                s,
            });
        }
        Ok(ObservedConfig(entries))
    }

    pub fn entries(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `rotate(r)` puts position `r` first.
    pub fn rotate(&self, r: usize) -> ObservedConfig {
        let n = self.0.len();
        ObservedConfig((0..n).map(|k| self.0[(k + r) % n]).collect())
    }
}

/// A sorted set of faulty node indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FaultSet(Vec<usize>);

impl FaultSet {
    pub fn new(mut members: Vec<usize>, n: usize) -> Result<Self, ModelError> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(ModelError::InvalidFaultSet("duplicate member".into()));
        }
        if let Some(&m) = members.iter().find(|&&m| m >= n) {
            return Err(ModelError::NodeOutOfRange { index: m, n });
        }
        Ok(FaultSet(members))
    }

    pub fn empty() -> Self {
        FaultSet(Vec::new())
    }

    pub fn singleton(i: usize) -> Self {
        FaultSet(vec![i])
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    /// Nodes of `[n]` outside the set, ascending.
    pub fn complement(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|&i| !self.contains(i)).collect()
    }

    /// Every fault set of size at most `f`, ordered by size and then
    /// lexicographically.
    pub fn all_up_to(n: usize, f: usize) -> Vec<FaultSet> {
        let mut out = Vec::new();
        for size in 0..=f.min(n) {
            let mut current = Vec::with_capacity(size);
            combinations(n, size, 0, &mut current, &mut out);
        }
        out
    }

    /// Fault sets of size at most `f` that are lexicographically smallest
    /// among their cyclic rotations. For `f = 1` this is `∅` and `{0}`.
    pub fn cyclic_representatives(n: usize, f: usize) -> Vec<FaultSet> {
        FaultSet::all_up_to(n, f)
            .into_iter()
            .filter(|set| {
                (1..n).all(|r| {
                    let mut rotated: Vec<usize> =
                        set.0.iter().map(|&m| (m + n - r) % n).collect();
                    rotated.sort_unstable();
                    set.0 <= rotated
                })
            })
            .collect()
    }
}

fn combinations(
    n: usize,
    size: usize,
    start: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<FaultSet>,
) {
    if current.len() == size {
        out.push(FaultSet(current.clone()));
        return;
    }
    for i in start..n {
        current.push(i);
        combinations(n, size, i + 1, current, out);
        current.pop();
    }
}

impl fmt::Display for FaultSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, m) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "}}")
    }
}

/// A configuration in `([s] ∪ {*})^n`; `*` is packed as the value `s`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActualConfig {
    s: u8,
    entries: Vec<u8>,
}

impl ActualConfig {
    pub fn new(entries: Vec<Option<u8>>, s: usize) -> Result<Self, ModelError> {
        let packed = entries
            .iter()
            .map(|e| match *e {
                Some(v) if (v as usize) < s => Ok(v),
                Some(v) => Err(ModelError::StateOutOfRange {
                    state: v as usize,
                    s,
                }),
                None => Ok(s as u8),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ActualConfig {
            s: s as u8,
            entries: packed,
        })
    }

    pub(crate) fn from_packed(entries: Vec<u8>, s: usize) -> Self {
        ActualConfig {
            s: s as u8,
            entries,
        }
    }

    pub fn get(&self, i: usize) -> Option<u8> {
        let v = self.entries[i];
        (v != self.s).then_some(v)
    }

    pub fn is_star(&self, i: usize) -> bool {
        self.entries[i] == self.s
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn states(&self) -> usize {
        self.s as usize
    }

    pub fn packed(&self) -> &[u8] {
        &self.entries
    }

    /// Positions holding `*`.
    pub fn fault_set(&self) -> FaultSet {
        FaultSet(
            (0..self.entries.len())
                .filter(|&i| self.is_star(i))
                .collect(),
        )
    }

    pub fn consistent_with(&self, faults: &FaultSet) -> bool {
        (0..self.entries.len()).all(|i| self.is_star(i) == faults.contains(i))
    }
}

impl fmt::Display for ActualConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wide = self.s > 10;
        for (k, _) in self.entries.iter().enumerate() {
            if wide && k > 0 {
                write!(f, ",")?;
            }
            match self.get(k) {
                Some(v) => write!(f, "{v}")?,
                None => write!(f, "*")?,
            }
        }
        Ok(())
    }
}

/// `π_F(u)`: replace the entries of faulty nodes by `*`.
pub fn project(u: &ObservedConfig, faults: &FaultSet, s: usize) -> ActualConfig {
    let entries = u
        .entries()
        .iter()
        .enumerate()
        .map(|(i, &v)| if faults.contains(i) { s as u8 } else { v })
        .collect();
    ActualConfig::from_packed(entries, s)
}

/// The actual configurations `V_F` for a fixed fault set, indexed densely.
///
/// Index `k` is the base-`s` little-endian value of the non-faulty entries,
/// lowest non-faulty node first, so enumeration order agrees with the
/// observed-configuration order restricted to non-faulty nodes.
#[derive(Debug, Clone)]
pub struct ActualSpace {
    n: usize,
    s: usize,
    faults: FaultSet,
    free: Vec<usize>,
    size: usize,
}

impl ActualSpace {
    pub fn new(n: usize, s: usize, faults: FaultSet) -> Self {
        let free = faults.complement(n);
        let size = s.pow(free.len() as u32);
        ActualSpace {
            n,
            s,
            faults,
            free,
            size,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn faults(&self) -> &FaultSet {
        &self.faults
    }

    /// Non-faulty nodes, ascending.
    pub fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn uniform_index(&self, state: u8) -> usize {
        (0..self.free.len()).fold(0usize, |acc, _| acc * self.s + state as usize)
    }

    pub fn zero_index(&self) -> usize {
        self.uniform_index(0)
    }

    pub fn one_index(&self) -> usize {
        self.uniform_index(1)
    }

    /// State of the `k`-th free node in configuration `index`.
    pub fn free_digit(&self, index: usize, k: usize) -> u8 {
        ((index / self.s.pow(k as u32)) % self.s) as u8
    }

    pub fn config(&self, index: usize) -> ActualConfig {
        let mut entries = vec![self.s as u8; self.n];
        let mut rest = index;
        for &node in &self.free {
            entries[node] = (rest % self.s) as u8;
            rest /= self.s;
        }
        ActualConfig::from_packed(entries, self.s)
    }

    pub fn index_of(&self, x: &ActualConfig) -> Result<usize, ModelError> {
        if x.len() != self.n {
            return Err(ModelError::WrongLength {
                got: x.len(),
                expected: self.n,
            });
        }
        if !x.consistent_with(&self.faults) {
            return Err(ModelError::FaultMismatch(self.faults.clone()));
        }
        Ok(self
            .free
            .iter()
            .rev()
            .fold(0usize, |acc, &node| acc * self.s + x.packed()[node] as usize))
    }

    /// Index of `π_F(u)` for an observed configuration given by its index.
    pub fn project_observed(&self, observed: usize) -> usize {
        let space = ConfigSpace::new(self.n, self.s);
        self.free
            .iter()
            .rev()
            .fold(0usize, |acc, &node| acc * self.s + space.digit(observed, node) as usize)
    }

    /// Observed configurations `U(x)` that project onto `x`, as indices.
    pub fn preimages(&self, index: usize) -> Vec<usize> {
        let space = ConfigSpace::new(self.n, self.s);
        let mut base = vec![0u8; self.n];
        let mut rest = index;
        for &node in &self.free {
            base[node] = (rest % self.s) as u8;
            rest /= self.s;
        }
        let fillings = self.s.pow(self.faults.len() as u32);
        (0..fillings)
            .map(|mut fill| {
                for &node in self.faults.members() {
                    base[node] = (fill % self.s) as u8;
                    fill /= self.s;
                }
                space.index(&base)
            })
            .collect()
    }
}

/// All actual configurations for `faults`, in index order.
pub fn enumerate_actuals(n: usize, s: usize, faults: &FaultSet) -> Vec<ActualConfig> {
    let space = ActualSpace::new(n, s, faults.clone());
    (0..space.size()).map(|k| space.config(k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgorithmClass {
    /// Invariant under cyclic renaming of the nodes; only node 0's table is
    /// stored.
    Cyclic,
    General,
}

impl fmt::Display for AlgorithmClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlgorithmClass::Cyclic => "cyclic",
            AlgorithmClass::General => "general",
        })
    }
}

impl FromStr for AlgorithmClass {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cyclic" => Ok(AlgorithmClass::Cyclic),
            "general" => Ok(AlgorithmClass::General),
            other => Err(ModelError::Parse(format!("unknown class {other:?}"))),
        }
    }
}

/// A deterministic algorithm: one transition table per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Algorithm {
    params: Params,
    class: AlgorithmClass,
    tables: Vec<Vec<u8>>,
}

impl Algorithm {
    pub fn general(params: Params, tables: Vec<Vec<u8>>) -> Result<Self, ModelError> {
        Self::build(params, AlgorithmClass::General, tables)
    }

    pub fn cyclic(params: Params, table: Vec<u8>) -> Result<Self, ModelError> {
        Self::build(params, AlgorithmClass::Cyclic, vec![table])
    }

    fn build(
        params: Params,
        class: AlgorithmClass,
        tables: Vec<Vec<u8>>,
    ) -> Result<Self, ModelError> {
        params.validate()?;
        let expected_tables = match class {
            AlgorithmClass::Cyclic => 1,
            AlgorithmClass::General => params.n,
        };
        if tables.len() != expected_tables {
            return Err(ModelError::WrongLength {
                got: tables.len(),
                expected: expected_tables,
            });
        }
        let size = params.observed_count();
        for table in &tables {
            if table.len() != size {
                return Err(ModelError::WrongLength {
                    got: table.len(),
                    expected: size,
                });
            }
            if let Some(&bad) = table.iter().find(|&&v| v as usize >= params.s) {
                return Err(ModelError::StateOutOfRange {
                    state: bad as usize,
                    s: params.s,
                });
            }
        }
        Ok(Algorithm {
            params,
            class,
            tables,
        })
    }

    /// Builds an algorithm from a rule `(node, observed digits) -> state`.
    /// For the cyclic class only node 0 is queried.
    pub fn from_fn(
        params: Params,
        class: AlgorithmClass,
        mut rule: impl FnMut(usize, &[u8]) -> u8,
    ) -> Result<Self, ModelError> {
        params.validate()?;
        let space = params.space();
        let nodes = match class {
            AlgorithmClass::Cyclic => 1,
            AlgorithmClass::General => params.n,
        };
        let mut digits = vec![0u8; params.n];
        let tables = (0..nodes)
            .map(|i| {
                (0..space.size())
                    .map(|j| {
                        space.write_digits(j, &mut digits);
                        rule(i, &digits)
                    })
                    .collect()
            })
            .collect();
        Self::build(params, class, tables)
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn class(&self) -> AlgorithmClass {
        self.class
    }

    /// Stored tables: one for cyclic algorithms, `n` otherwise.
    pub fn tables(&self) -> &[Vec<u8>] {
        &self.tables
    }

    pub fn with_params(mut self, params: Params) -> Result<Self, ModelError> {
        if params.n != self.params.n || params.s != self.params.s {
            return Err(ModelError::InvalidParams(
                "n and s of an algorithm cannot change".into(),
            ));
        }
        params.validate()?;
        self.params = params;
        Ok(self)
    }

    /// New state of node `i` after observing `u`.
    pub fn transition(&self, i: usize, u: &ObservedConfig) -> Result<u8, ModelError> {
        let n = self.params.n;
        if i >= n {
            return Err(ModelError::NodeOutOfRange { index: i, n });
        }
        if u.len() != n {
            return Err(ModelError::WrongLength {
                got: u.len(),
                expected: n,
            });
        }
        if let Some(&bad) = u.entries().iter().find(|&&v| v as usize >= self.params.s) {
            return Err(ModelError::StateOutOfRange {
                state: bad as usize,
                s: self.params.s,
            });
        }
        Ok(self.transition_index(i, self.params.space().index(u.entries())))
    }

    /// Table lookup by observed-configuration index. Panics when `i >= n`.
    pub fn transition_index(&self, i: usize, observed: usize) -> u8 {
        assert!(i < self.params.n, "node {i} out of range");
        match self.class {
            AlgorithmClass::General => self.tables[i][observed],
            AlgorithmClass::Cyclic => {
                self.tables[0][self.params.space().rotate(observed, i)]
            }
        }
    }

    /// Full per-node tables, materialising rotations for cyclic algorithms.
    pub fn expanded_tables(&self) -> Vec<Vec<u8>> {
        match self.class {
            AlgorithmClass::General => self.tables.clone(),
            AlgorithmClass::Cyclic => {
                let space = self.params.space();
                (0..self.params.n)
                    .map(|i| {
                        (0..space.size())
                            .map(|j| self.tables[0][space.rotate(j, i)])
                            .collect()
                    })
                    .collect()
            }
        }
    }

    /// The same transition function, tagged as a general algorithm.
    pub fn to_general(&self) -> Algorithm {
        Algorithm {
            params: self.params,
            class: AlgorithmClass::General,
            tables: self.expanded_tables(),
        }
    }

    /// Serialises to the line-oriented `counting-algorithm v1` format.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = format!(
            "{FILE_MAGIC}\nn={} f={} s={} t={} class={}\n",
            p.n, p.f, p.s, p.t, self.class
        );
        for table in &self.tables {
            let line: Vec<String> = table.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let body = text
            .strip_suffix('\n')
            .ok_or_else(|| ModelError::Parse("missing trailing newline".into()))?;
        let mut lines = body.split('\n');
        if lines.next() != Some(FILE_MAGIC) {
            return Err(ModelError::Parse(format!("first line must be {FILE_MAGIC:?}")));
        }
        let header = lines
            .next()
            .ok_or_else(|| ModelError::Parse("missing parameter line".into()))?;
        let fields: Vec<&str> = header.split(' ').collect();
        let keys = ["n", "f", "s", "t", "class"];
        if fields.len() != keys.len() {
            return Err(ModelError::Parse(format!("bad parameter line {header:?}")));
        }
        let mut values = Vec::with_capacity(keys.len());
        for (field, key) in fields.iter().zip(keys) {
            let value = field
                .strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .ok_or_else(|| ModelError::Parse(format!("expected {key}=..., got {field:?}")))?;
            values.push(value);
        }
        let number = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| ModelError::Parse(format!("bad number {v:?}")))
        };
        let params = Params::new(
            number(values[0])?,
            number(values[1])?,
            number(values[2])?,
            number(values[3])? as u32,
        )?;
        let class: AlgorithmClass = values[4].parse()?;
        let tables = lines
            .map(|line| {
                if line.is_empty() {
                    return Err(ModelError::Parse("empty table line".into()));
                }
                line.split(' ')
                    .map(|v| {
                        v.parse::<u8>()
                            .map_err(|_| ModelError::Parse(format!("bad entry {v:?}")))
                    })
                    .collect::<Result<Vec<u8>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::build(params, class, tables)
    }
}

/// A finite execution under one fault set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub faults: FaultSet,
    pub configs: Vec<ActualConfig>,
}

impl Execution {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }
}

impl fmt::Display for Execution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (round, x) in self.configs.iter().enumerate() {
            writeln!(f, "{round} {x}")?;
        }
        Ok(())
    }
}
