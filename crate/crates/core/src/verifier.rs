//! Exact verification through projection graphs.
//!
//! For a fault set `F` the projection graph has the actual configurations
//! `V_F` as nodes and an edge `x -> y` whenever the adversary can steer every
//! non-faulty node `i` into `y_i` from `x`. An algorithm stabilises in time
//! `t` iff, for every admissible `F`, the two good configurations `0_F` and
//! `1_F` are each other's only successor and no walk of length `t` avoids
//! them.

use std::collections::VecDeque;
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{
    ActualConfig, ActualSpace, Algorithm, AlgorithmClass, ConfigSpace, Execution, FaultSet,
    ModelError,
};

/// Default cap on `|V_F|` for a single projection graph.
pub const DEFAULT_MAX_CONFIGS: usize = 1 << 22;
/// Default cap on the number of edges of a single projection graph.
pub const DEFAULT_MAX_EDGES: usize = 1 << 27;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("projection graph for F={faults} too large: {what}")]
    TooLarge { faults: FaultSet, what: String },
    #[error("|F|={size} exceeds f={f}")]
    TooManyFaults { size: usize, f: usize },
    #[error("graph for F={0} stabilises within the requested bound; no counterexample")]
    Stabilizes(FaultSet),
}

#[derive(Debug, Clone, Copy)]
pub struct GraphLimits {
    pub max_configs: usize,
    pub max_edges: usize,
}

impl Default for GraphLimits {
    fn default() -> Self {
        GraphLimits {
            max_configs: DEFAULT_MAX_CONFIGS,
            max_edges: DEFAULT_MAX_EDGES,
        }
    }
}

/// Whether `y` is reachable from `x` in one round under fault set `faults`.
///
/// Each non-faulty node is checked independently over every filling of the
/// faulty slots, so the adversary may lie differently to different nodes.
pub fn is_reachable(
    alg: &Algorithm,
    faults: &FaultSet,
    x: &ActualConfig,
    y: &ActualConfig,
) -> Result<bool, ModelError> {
    let p = alg.params();
    let space = ActualSpace::new(p.n, p.s, faults.clone());
    let xi = space.index_of(x)?;
    space.index_of(y)?;
    let preimages = space.preimages(xi);
    Ok(faults.complement(p.n).into_iter().all(|i| {
        let target = y.get(i).expect("non-faulty entry");
        preimages
            .iter()
            .any(|&u| alg.transition_index(i, u) == target)
    }))
}

/// Longest walk through non-good configurations starting at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BadDepth {
    /// `0_F` or `1_F`.
    Good,
    /// The longest good-avoiding walk from here has this many edges.
    Finite(u32),
    /// A good-avoiding cycle is reachable.
    Infinite,
}

/// `G_F(A)` together with its bad-set certificate.
#[derive(Debug, Clone)]
pub struct ProjectionGraph {
    space: ActualSpace,
    successors: Vec<Vec<u32>>,
    depth: Vec<BadDepth>,
}

pub fn build_projection_graph(
    alg: &Algorithm,
    faults: &FaultSet,
) -> Result<ProjectionGraph, VerifyError> {
    build_projection_graph_with(alg, faults, GraphLimits::default())
}

pub fn build_projection_graph_with(
    alg: &Algorithm,
    faults: &FaultSet,
    limits: GraphLimits,
) -> Result<ProjectionGraph, VerifyError> {
    let tables = alg.expanded_tables();
    build_from_tables(alg, &tables, faults, limits)
}

fn build_from_tables(
    alg: &Algorithm,
    tables: &[Vec<u8>],
    faults: &FaultSet,
    limits: GraphLimits,
) -> Result<ProjectionGraph, VerifyError> {
    let p = alg.params();
    if faults.len() > p.f {
        return Err(VerifyError::TooManyFaults {
            size: faults.len(),
            f: p.f,
        });
    }
    if let Some(&m) = faults.members().iter().find(|&&m| m >= p.n) {
        return Err(ModelError::NodeOutOfRange { index: m, n: p.n }.into());
    }
    let free_count = p.n - faults.len();
    let too_large = |what: String| VerifyError::TooLarge {
        faults: faults.clone(),
        what,
    };
    let size = (p.s as u128).pow(free_count as u32);
    if size > limits.max_configs as u128 {
        return Err(too_large(format!(
            "{size} configurations exceed the cap of {}",
            limits.max_configs
        )));
    }
    let space = ActualSpace::new(p.n, p.s, faults.clone());
    let free = space.free_nodes().to_vec();

    let mut successors = Vec::with_capacity(space.size());
    let mut edges = 0usize;
    for x in 0..space.size() {
        // per free node, the set of states the adversary can force
        let mut allowed = vec![0u64; free.len()];
        for u in space.preimages(x) {
            for (k, &i) in free.iter().enumerate() {
                allowed[k] |= 1u64 << tables[i][u];
            }
        }
        let choices: Vec<Vec<u8>> = allowed
            .iter()
            .map(|&mask| (0..p.s as u8).filter(|c| mask & (1u64 << c) != 0).collect())
            .collect();
        let out_degree: usize = choices.iter().map(Vec::len).product();
        edges += out_degree;
        if edges > limits.max_edges {
            return Err(too_large(format!("more than {} edges", limits.max_edges)));
        }
        let mut succ = Vec::with_capacity(out_degree);
        let mut cursor = vec![0usize; free.len()];
        'product: loop {
            let y = cursor
                .iter()
                .enumerate()
                .rev()
                .fold(0usize, |acc, (k, &c)| acc * p.s + choices[k][c] as usize);
            succ.push(y as u32);
            for k in 0..free.len() {
                cursor[k] += 1;
                if cursor[k] < choices[k].len() {
                    continue 'product;
                }
                cursor[k] = 0;
            }
            break;
        }
        succ.sort_unstable();
        successors.push(succ);
    }
    let depth = bad_depths(&space, &successors);
    Ok(ProjectionGraph {
        space,
        successors,
        depth,
    })
}

/// Longest good-avoiding walk from each node, propagated backwards from the
/// sinks of the non-good subgraph. Nodes never released lie on or reach a
/// non-good cycle.
fn bad_depths(space: &ActualSpace, successors: &[Vec<u32>]) -> Vec<BadDepth> {
    let n = successors.len();
    let good = |x: usize| x == space.zero_index() || x == space.one_index();
    let mut predecessors: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut pending = vec![0usize; n];
    for (x, succ) in successors.iter().enumerate() {
        if good(x) {
            continue;
        }
        for &y in succ {
            if !good(y as usize) {
                predecessors[y as usize].push(x as u32);
                pending[x] += 1;
            }
        }
    }
    let mut depth: Vec<Option<u32>> = vec![None; n];
    let mut queue = VecDeque::new();
    for x in 0..n {
        if !good(x) && pending[x] == 0 {
            depth[x] = Some(0);
            queue.push_back(x);
        }
    }
    while let Some(y) = queue.pop_front() {
        let dy = depth[y].expect("released nodes have a depth");
        for &x in &predecessors[y] {
            let x = x as usize;
            depth[x] = Some(depth[x].map_or(dy + 1, |d| d.max(dy + 1)));
            pending[x] -= 1;
            if pending[x] == 0 {
                queue.push_back(x);
            }
        }
    }
    (0..n)
        .map(|x| {
            if good(x) {
                BadDepth::Good
            } else if pending[x] > 0 {
                BadDepth::Infinite
            } else {
                BadDepth::Finite(depth[x].expect("released"))
            }
        })
        .collect()
}

impl ProjectionGraph {
    pub fn faults(&self) -> &FaultSet {
        self.space.faults()
    }

    pub fn space(&self) -> &ActualSpace {
        &self.space
    }

    pub fn node_count(&self) -> usize {
        self.successors.len()
    }

    pub fn edge_count(&self) -> usize {
        self.successors.iter().map(Vec::len).sum()
    }

    pub fn successors(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.successors[x].iter().map(|&y| y as usize)
    }

    pub fn has_edge(&self, x: usize, y: usize) -> bool {
        self.successors[x].binary_search(&(y as u32)).is_ok()
    }

    pub fn config(&self, x: usize) -> ActualConfig {
        self.space.config(x)
    }

    pub fn zero(&self) -> usize {
        self.space.zero_index()
    }

    pub fn one(&self) -> usize {
        self.space.one_index()
    }

    pub fn is_good(&self, x: usize) -> bool {
        x == self.zero() || x == self.one()
    }

    pub fn depth(&self, x: usize) -> BadDepth {
        self.depth[x]
    }

    /// Worst-case number of rounds until a good configuration is reached:
    /// 0 for good nodes, `None` when some execution never gets there.
    pub fn rounds_to_good(&self, x: usize) -> Option<u32> {
        match self.depth[x] {
            BadDepth::Good => Some(0),
            BadDepth::Finite(d) => Some(d + 1),
            BadDepth::Infinite => None,
        }
    }

    /// The only successor of `0_F` is `1_F` and vice versa.
    pub fn good_cycle_exclusive(&self) -> bool {
        self.successors[self.zero()] == [self.one() as u32]
            && self.successors[self.one()] == [self.zero() as u32]
    }

    /// `B_F(d)`: configurations with a good-avoiding walk of length `d`.
    pub fn bad_set(&self, d: u32) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&x| match self.depth[x] {
                BadDepth::Good => false,
                BadDepth::Finite(depth) => depth >= d,
                BadDepth::Infinite => true,
            })
            .collect()
    }

    /// Smallest `d` with `B_F(d) = ∅`, or `None` if every `B_F(d)` is
    /// non-empty.
    pub fn bad_sets_vanish_at(&self) -> Option<u32> {
        let mut worst = None;
        for depth in &self.depth {
            match *depth {
                BadDepth::Good => {}
                BadDepth::Infinite => return None,
                BadDepth::Finite(d) => worst = Some(worst.map_or(d, |w: u32| w.max(d))),
            }
        }
        Some(worst.map_or(0, |w| w + 1))
    }

    /// Exact stabilisation time for this fault set, `None` if it never
    /// stabilises.
    pub fn stabilization_time(&self) -> Option<u32> {
        if !self.good_cycle_exclusive() {
            return None;
        }
        self.bad_sets_vanish_at()
    }
}

/// Builds a witness that the graph does not stabilise within `t` rounds.
///
/// Prefers a good-avoiding walk of length `t`; otherwise returns a two-step
/// execution leaving `0_F` or `1_F` for a wrong successor.
pub fn extract_counterexample(g: &ProjectionGraph, t: u32) -> Result<Execution, VerifyError> {
    let reaches = |x: usize, need: u32| match g.depth(x) {
        BadDepth::Good => false,
        BadDepth::Finite(d) => d >= need,
        BadDepth::Infinite => true,
    };
    if let Some(start) = (0..g.node_count()).find(|&x| reaches(x, t)) {
        let mut walk = vec![start];
        let mut current = start;
        for step in 1..=t {
            let next = g
                .successors(current)
                .find(|&y| reaches(y, t - step))
                .expect("bad-set certificate guarantees a continuation");
            walk.push(next);
            current = next;
        }
        return Ok(Execution {
            faults: g.faults().clone(),
            configs: walk.into_iter().map(|x| g.config(x)).collect(),
        });
    }
    for (from, expected) in [(g.zero(), g.one()), (g.one(), g.zero())] {
        if let Some(wrong) = g.successors(from).find(|&y| y != expected) {
            return Ok(Execution {
                faults: g.faults().clone(),
                configs: vec![g.config(from), g.config(wrong)],
            });
        }
    }
    Err(VerifyError::Stabilizes(g.faults().clone()))
}

/// Required bounds: `t` for every fault set, and optionally a tighter `t0`
/// for the fault-free case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StabilizationBounds {
    pub t: u32,
    pub t0: Option<u32>,
}

impl StabilizationBounds {
    pub fn uniform(t: u32) -> Self {
        StabilizationBounds { t, t0: None }
    }

    pub fn for_faults(&self, faults: &FaultSet) -> u32 {
        if faults.is_empty() {
            self.t0.unwrap_or(self.t)
        } else {
            self.t
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stabilizes,
    Fails,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultReport {
    pub faults: FaultSet,
    pub good_cycle_exclusive: bool,
    /// Exact stabilisation time, `None` for never.
    pub stab_time: Option<u32>,
    pub node_count: usize,
    pub edge_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub bounds: StabilizationBounds,
    pub per_fault: Vec<FaultReport>,
    pub counterexample: Option<Execution>,
}

impl VerificationReport {
    pub fn stabilizes(&self) -> bool {
        self.verdict == Verdict::Stabilizes
    }

    /// Worst exact stabilisation time over all checked fault sets.
    pub fn stabilization_time(&self) -> Option<u32> {
        self.per_fault
            .iter()
            .map(|r| r.stab_time)
            .try_fold(0u32, |acc, t| t.map(|t| acc.max(t)))
    }

    /// Line-oriented certificate: one `F=<set> stab_time=<d|inf>` line per
    /// fault set, a verdict line, then the counterexample if any.
    pub fn to_certificate(&self) -> String {
        let mut out = String::new();
        for r in &self.per_fault {
            let time = r.stab_time.map_or_else(|| "inf".to_string(), |t| t.to_string());
            let _ = writeln!(out, "F={} stab_time={time}", r.faults);
        }
        let verdict = match self.verdict {
            Verdict::Stabilizes => "stabilizes",
            Verdict::Fails => "fails",
        };
        let _ = write!(out, "verdict={verdict} t={}", self.bounds.t);
        if let Some(t0) = self.bounds.t0 {
            let _ = write!(out, " t0={t0}");
        }
        out.push('\n');
        if let Some(cex) = &self.counterexample {
            let _ = writeln!(out, "counterexample F={} rounds={}", cex.faults, cex.len());
            out.push_str(&cex.to_string());
        }
        out
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_certificate())
    }
}

/// Fault sets that must be examined. Cyclic algorithms have isomorphic
/// projection graphs for rotated fault sets, so one representative per
/// rotation orbit suffices.
pub fn fault_sets_to_check(alg: &Algorithm) -> Vec<FaultSet> {
    let p = alg.params();
    match alg.class() {
        AlgorithmClass::Cyclic => FaultSet::cyclic_representatives(p.n, p.f),
        AlgorithmClass::General => FaultSet::all_up_to(p.n, p.f),
    }
}

pub fn check_stabilization(alg: &Algorithm, t: u32) -> Result<VerificationReport, VerifyError> {
    check_stabilization_with(alg, StabilizationBounds::uniform(t), GraphLimits::default())
}

pub fn check_stabilization_with(
    alg: &Algorithm,
    bounds: StabilizationBounds,
    limits: GraphLimits,
) -> Result<VerificationReport, VerifyError> {
    check_fault_sets(alg, &fault_sets_to_check(alg), bounds, limits)
}

/// Checks an explicit list of fault sets.
pub fn check_fault_sets(
    alg: &Algorithm,
    fault_sets: &[FaultSet],
    bounds: StabilizationBounds,
    limits: GraphLimits,
) -> Result<VerificationReport, VerifyError> {
    let tables = alg.expanded_tables();
    let graphs: Vec<ProjectionGraph> = fault_sets
        .par_iter()
        .map(|faults| build_from_tables(alg, &tables, faults, limits))
        .collect::<Result<_, _>>()?;

    let mut per_fault = Vec::with_capacity(graphs.len());
    let mut counterexample = None;
    for g in &graphs {
        let stab_time = g.stabilization_time();
        let bound = bounds.for_faults(g.faults());
        let ok = stab_time.is_some_and(|d| d <= bound);
        if !ok && counterexample.is_none() {
            counterexample = Some(extract_counterexample(g, bound)?);
        }
        per_fault.push(FaultReport {
            faults: g.faults().clone(),
            good_cycle_exclusive: g.good_cycle_exclusive(),
            stab_time,
            node_count: g.node_count(),
            edge_count: g.edge_count(),
        });
    }
    let verdict = if counterexample.is_none() {
        Verdict::Stabilizes
    } else {
        Verdict::Fails
    };
    Ok(VerificationReport {
        verdict,
        bounds,
        per_fault,
        counterexample,
    })
}

/// Checks that consecutive configurations of an execution are reachable.
pub fn replays(alg: &Algorithm, execution: &Execution) -> Result<bool, ModelError> {
    for pair in execution.configs.windows(2) {
        if !is_reachable(alg, &execution.faults, &pair[0], &pair[1])? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Renders the graph in DOT, clustering configurations by the worst-case
/// number of rounds they need to reach a good configuration.
pub fn export_dot(g: &ProjectionGraph) -> String {
    let mut clusters: Vec<(Option<u32>, Vec<usize>)> = Vec::new();
    let mut keyed: Vec<(Option<u32>, usize)> = (0..g.node_count())
        .map(|x| (g.rounds_to_good(x), x))
        .collect();
    // finite distances ascending, unbounded last
    keyed.sort_by_key(|&(d, x)| (d.is_none(), d, x));
    for (d, x) in keyed {
        match clusters.last_mut() {
            Some((last, members)) if *last == d => members.push(x),
            _ => clusters.push((d, vec![x])),
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "digraph projection {{");
    let _ = writeln!(out, "  label=\"F={}\";", g.faults());
    for (d, members) in &clusters {
        let name = d.map_or_else(|| "inf".to_string(), |d| d.to_string());
        let _ = writeln!(out, "  subgraph cluster_{name} {{");
        let _ = writeln!(out, "    label=\"{name}\";");
        for &x in members {
            let _ = writeln!(out, "    n{x} [label=\"{}\"];", g.config(x));
        }
        let _ = writeln!(out, "  }}");
    }
    for x in 0..g.node_count() {
        for y in g.successors(x) {
            let _ = writeln!(out, "  n{x} -> n{y};");
        }
    }
    out.push_str("}\n");
    out
}

/// Brute-force reachability that scans all of `[s]^n` for each node. Shares
/// nothing with the projection shortcuts above; used as a test oracle.
pub fn is_reachable_brute_force(
    alg: &Algorithm,
    faults: &FaultSet,
    x: &ActualConfig,
    y: &ActualConfig,
) -> bool {
    let p = alg.params();
    let space = ConfigSpace::new(p.n, p.s);
    (0..p.n).filter(|&i| !faults.contains(i)).all(|i| {
        (0..space.size()).any(|u| {
            let digits = space.digits(u);
            let projects = (0..p.n).all(|k| faults.contains(k) || x.get(k) == Some(digits[k]));
            projects && alg.transition_index(i, u) == y.get(i).expect("non-faulty")
        })
    })
}
