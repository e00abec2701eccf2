//! Constructions that carry a verified 2-counter to larger settings: one more
//! node, sparse topologies with a clique core, and layered `2^b`-counters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::{Algorithm, AlgorithmClass, ModelError, Params};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("extension needs 2f < n, got n={n} f={f}")]
    TooManyFaults { n: usize, f: usize },
    #[error("malformed topology: {0}")]
    Parse(String),
    #[error("no {k}-clique found{}", if *.capped { " within the search cap" } else { "" })]
    NoClique { k: usize, capped: bool },
    #[error("graph is not a member of G({k},{m},{d})")]
    NotMember { k: usize, m: usize, d: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("cannot compose an empty sequence of layers")]
    EmptyComposition,
    #[error("layers disagree: {0}")]
    LayerMismatch(String),
}

/// Adds node `n` to an `n`-node algorithm. The old nodes ignore it; the new
/// node adopts the majority of what the old nodes are about to output, with
/// ties resolved to 0.
pub fn extend_node(alg: &Algorithm) -> Result<Algorithm, TransformError> {
    let p = *alg.params();
    if 2 * p.f >= p.n {
        return Err(TransformError::TooManyFaults { n: p.n, f: p.f });
    }
    let params = Params {
        n: p.n + 1,
        ..p
    };
    params.validate()?;
    let inner = p.observed_count();
    let old = alg.expanded_tables();
    let mut tables: Vec<Vec<u8>> = old
        .iter()
        .map(|t| (0..params.observed_count()).map(|u| t[u % inner]).collect())
        .collect();
    let predictor = (0..params.observed_count())
        .map(|u| {
            let ones = old.iter().filter(|t| t[u % inner] == 1).count();
            u8::from(2 * ones > p.n)
        })
        .collect();
    tables.push(predictor);
    Ok(Algorithm::general(params, tables)?)
}

/// Undirected graph on arbitrary integer vertex ids with an optional layer
/// partition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopologyGraph {
    adj: BTreeMap<usize, BTreeSet<usize>>,
    partition: Option<Vec<Vec<usize>>>,
}

impl TopologyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, v: usize) {
        self.adj.entry(v).or_default();
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a == b {
            self.add_vertex(a);
            return;
        }
        self.adj.entry(a).or_default().insert(b);
        self.adj.entry(b).or_default().insert(a);
    }

    pub fn complete(k: usize) -> Self {
        let mut g = Self::new();
        for a in 0..k {
            g.add_vertex(a);
            for b in a + 1..k {
                g.add_edge(a, b);
            }
        }
        g
    }

    /// Cycle on `len` vertices with edges to every vertex within `radius`.
    pub fn circulant(len: usize, radius: usize) -> Self {
        let mut g = Self::new();
        for a in 0..len {
            g.add_vertex(a);
            for r in 1..=radius {
                g.add_edge(a, (a + r) % len);
            }
        }
        g
    }

    /// Vertex ids in increasing order.
    pub fn vertices(&self) -> Vec<usize> {
        self.adj.keys().copied().collect()
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj.get(&v).into_iter().flatten().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj.get(&a).is_some_and(|n| n.contains(&b))
    }

    pub fn is_clique(&self, vs: &[usize]) -> bool {
        vs.iter()
            .enumerate()
            .all(|(i, &a)| vs[i + 1..].iter().all(|&b| self.has_edge(a, b)))
    }

    pub fn partition(&self) -> Option<&[Vec<usize>]> {
        self.partition.as_deref()
    }

    pub fn set_partition(&mut self, layers: Vec<Vec<usize>>) {
        self.partition = Some(layers);
    }

    /// Parses `v <id>`, `e <a> <b>` and `p <layer> <id>...` lines; `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self, TransformError> {
        let mut g = Self::new();
        let mut layers: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let kind = words.next().unwrap_or_default();
            let nums: Vec<usize> = words
                .map(|w| {
                    w.parse()
                        .map_err(|_| TransformError::Parse(format!("line {}: bad id {w:?}", no + 1)))
                })
                .collect::<Result<_, _>>()?;
            match (kind, nums.as_slice()) {
                ("v", [v]) => g.add_vertex(*v),
                ("e", [a, b]) => g.add_edge(*a, *b),
                ("p", [layer, ids @ ..]) => layers.entry(*layer).or_default().extend(ids),
                _ => {
                    return Err(TransformError::Parse(format!(
                        "line {}: unrecognised {line:?}",
                        no + 1
                    )))
                }
            }
        }
        if !layers.is_empty() {
            let count = layers.keys().max().map_or(0, |m| m + 1);
            let mut parts = vec![Vec::new(); count];
            for (layer, ids) in layers {
                parts[layer] = ids;
            }
            for ids in parts.iter().flatten() {
                if !g.adj.contains_key(ids) {
                    return Err(TransformError::Parse(format!(
                        "partition mentions unknown vertex {ids}"
                    )));
                }
            }
            g.partition = Some(parts);
        }
        Ok(g)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in self.adj.keys() {
            let _ = writeln!(out, "v {v}");
        }
        for (&a, ns) in &self.adj {
            for &b in ns.range(a + 1..) {
                let _ = writeln!(out, "e {a} {b}");
            }
        }
        if let Some(parts) = &self.partition {
            for (layer, ids) in parts.iter().enumerate() {
                let _ = write!(out, "p {layer}");
                for id in ids {
                    let _ = write!(out, " {id}");
                }
                out.push('\n');
            }
        }
        out
    }
}

impl fmt::Display for TopologyGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Default cap on `|V|` above which no clique search is attempted.
pub const DEFAULT_CLIQUE_SEARCH_CAP: usize = 64;

/// Runs the blackening game from `core`: in each iteration every white
/// vertex with at least `m` black neighbours turns black. Returns the
/// layers, or `None` if some vertex is still white after `d` iterations.
pub fn blacken(g: &TopologyGraph, core: &[usize], m: usize, d: usize) -> Option<Vec<Vec<usize>>> {
    let mut black: BTreeSet<usize> = core.iter().copied().collect();
    let mut layers = vec![core.to_vec()];
    for _ in 0..d {
        if black.len() == g.vertex_count() {
            break;
        }
        let next: Vec<usize> = g
            .adj
            .keys()
            .copied()
            .filter(|v| !black.contains(v))
            .filter(|&v| g.neighbours(v).filter(|w| black.contains(w)).count() >= m)
            .collect();
        if next.is_empty() {
            return None;
        }
        black.extend(&next);
        layers.push(next);
    }
    (black.len() == g.vertex_count()).then_some(layers)
}

fn for_each_clique(
    g: &TopologyGraph,
    k: usize,
    chosen: &mut Vec<usize>,
    candidates: &[usize],
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    if chosen.len() == k {
        return visit(chosen);
    }
    for (idx, &v) in candidates.iter().enumerate() {
        if chosen.len() + candidates.len() - idx < k {
            break;
        }
        let rest: Vec<usize> = candidates[idx + 1..]
            .iter()
            .copied()
            .filter(|&w| g.has_edge(v, w))
            .collect();
        chosen.push(v);
        let stop = for_each_clique(g, k, chosen, &rest, visit);
        chosen.pop();
        if stop {
            return true;
        }
    }
    false
}

/// Decides membership in `G(k, m, d)`. With `core` given only that clique is
/// tried; otherwise all `k`-cliques are searched when `|V| <= search_cap`.
pub fn check_topology(
    g: &TopologyGraph,
    k: usize,
    m: usize,
    d: usize,
    core: Option<&[usize]>,
    search_cap: usize,
) -> Result<Vec<Vec<usize>>, TransformError> {
    if let Some(core) = core {
        if core.len() != k || !g.is_clique(core) || core.iter().any(|v| !g.adj.contains_key(v)) {
            return Err(TransformError::InvalidPartition(format!(
                "core {core:?} is not a {k}-clique of the graph"
            )));
        }
        return blacken(g, core, m, d).ok_or(TransformError::NotMember { k, m, d });
    }
    if g.vertex_count() > search_cap {
        return Err(TransformError::NoClique { k, capped: true });
    }
    let vertices = g.vertices();
    let mut found_clique = false;
    let mut result = None;
    for_each_clique(g, k, &mut Vec::with_capacity(k), &vertices, &mut |clique| {
        found_clique = true;
        result = blacken(g, clique, m, d);
        result.is_some()
    });
    match result {
        Some(layers) => Ok(layers),
        None if found_clique => Err(TransformError::NotMember { k, m, d }),
        None => Err(TransformError::NoClique { k, capped: false }),
    }
}

/// An algorithm running on a [`TopologyGraph`]: core vertices execute the
/// complete-graph algorithm; first-layer vertices adjacent to the whole core
/// predict the core's next output like [`extend_node`]; every other vertex
/// follows the strict majority of its neighbours in earlier layers.
#[derive(Debug, Clone)]
pub struct TopologyAlgorithm {
    alg: Algorithm,
    graph: TopologyGraph,
    layers: Vec<Vec<usize>>,
    ids: Vec<usize>,
    /// Core position of each vertex (by dense index), if in the core.
    core_pos: Vec<Option<usize>>,
    /// Dense indices of the core vertices in algorithm order.
    core: Vec<usize>,
    /// Dense indices of each non-core vertex's earlier-layer neighbours.
    parents: Vec<Vec<usize>>,
    /// First-layer vertices that see every core vertex.
    predicts: Vec<bool>,
}

/// Requires every non-core vertex to have `2f + 1` earlier-layer neighbours.
pub fn generalize_topology(
    alg: &Algorithm,
    graph: &TopologyGraph,
    layers: &[Vec<usize>],
) -> Result<TopologyAlgorithm, TransformError> {
    generalize_topology_with_threshold(alg, graph, layers, 2 * alg.params().f + 1)
}

/// As [`generalize_topology`] with an explicit neighbour threshold `m`.
/// Thresholds below `2f + 1` give no stabilisation guarantee.
pub fn generalize_topology_with_threshold(
    alg: &Algorithm,
    graph: &TopologyGraph,
    layers: &[Vec<usize>],
    m: usize,
) -> Result<TopologyAlgorithm, TransformError> {
    let p = alg.params();
    let invalid = |msg: String| Err(TransformError::InvalidPartition(msg));
    let Some(core_ids) = layers.first() else {
        return invalid("no layers".into());
    };
    if core_ids.len() != p.n {
        return invalid(format!("core has {} vertices, algorithm has n={}", core_ids.len(), p.n));
    }
    if !graph.is_clique(core_ids) {
        return invalid("core is not a clique".into());
    }
    let ids = graph.vertices();
    let dense: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut layer_of = vec![None; ids.len()];
    for (a, layer) in layers.iter().enumerate() {
        for v in layer {
            let Some(&i) = dense.get(v) else {
                return invalid(format!("unknown vertex {v}"));
            };
            if layer_of[i].replace(a).is_some() {
                return invalid(format!("vertex {v} appears twice"));
            }
        }
    }
    if let Some(i) = layer_of.iter().position(Option::is_none) {
        return invalid(format!("vertex {} is not covered", ids[i]));
    }
    let layer_of: Vec<usize> = layer_of.into_iter().map(Option::unwrap).collect();
    let mut core_pos = vec![None; ids.len()];
    let core: Vec<usize> = core_ids.iter().map(|v| dense[v]).collect();
    for (pos, &i) in core.iter().enumerate() {
        core_pos[i] = Some(pos);
    }
    let mut parents = vec![Vec::new(); ids.len()];
    for (i, &v) in ids.iter().enumerate() {
        if layer_of[i] == 0 {
            continue;
        }
        let earlier: Vec<usize> = graph
            .neighbours(v)
            .map(|w| dense[&w])
            .filter(|&j| layer_of[j] < layer_of[i])
            .collect();
        if earlier.len() < m {
            return invalid(format!(
                "vertex {v} has {} earlier neighbours, needs {m}",
                earlier.len()
            ));
        }
        parents[i] = earlier;
    }
    let predicts = (0..ids.len())
        .map(|i| layer_of[i] == 1 && core.iter().all(|&j| graph.has_edge(ids[i], ids[j])))
        .collect();
    let mut graph = graph.clone();
    graph.set_partition(layers.to_vec());
    Ok(TopologyAlgorithm {
        alg: alg.clone(),
        graph,
        layers: layers.to_vec(),
        ids,
        core_pos,
        core,
        parents,
        predicts,
    })
}

impl TopologyAlgorithm {
    pub fn algorithm(&self) -> &Algorithm {
        &self.alg
    }

    pub fn graph(&self) -> &TopologyGraph {
        &self.graph
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    /// Whether dense node `i` uses the prediction rule.
    pub fn predicts(&self, i: usize) -> bool {
        self.predicts[i]
    }

    /// Number of layers after the core.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    /// Vertex ids in dense order.
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn states(&self) -> usize {
        self.alg.params().s
    }

    /// Dense indices of the core in algorithm order.
    pub fn core(&self) -> &[usize] {
        &self.core
    }

    /// New state of dense node `i` given every node's reported state.
    pub fn step(&self, i: usize, observed: &[u8]) -> u8 {
        let core_index = || {
            let s = self.alg.params().s;
            self.core
                .iter()
                .rev()
                .fold(0usize, |acc, &j| acc * s + observed[j] as usize)
        };
        if let Some(pos) = self.core_pos[i] {
            return self.alg.transition_index(pos, core_index());
        }
        if self.predicts[i] {
            let u = core_index();
            let n = self.core.len();
            let ones = (0..n).filter(|&j| self.alg.transition_index(j, u) == 1).count();
            return u8::from(2 * ones > n);
        }
        let parents = &self.parents[i];
        let ones = parents.iter().filter(|&&j| observed[j] == 1).count();
        let zeros = parents.iter().filter(|&&j| observed[j] == 0).count();
        if 2 * zeros > parents.len() {
            1
        } else if 2 * ones > parents.len() {
            0
        } else {
            observed[i]
        }
    }

    /// The same behaviour as a general algorithm on all vertices of the
    /// graph, so that the exact verifier applies. Fails when `s^|V|` is too
    /// large to tabulate.
    pub fn to_algorithm(&self, max_table: usize) -> Result<Algorithm, TransformError> {
        let p = self.alg.params();
        let n = self.node_count();
        let params = Params { n, ..*p };
        params.validate()?;
        if params.observed_count() > max_table {
            return Err(ModelError::TooLarge(format!(
                "s^|V| = {}^{n} exceeds {max_table}",
                p.s
            ))
            .into());
        }
        Ok(Algorithm::from_fn(params, AlgorithmClass::General, |i, u| {
            self.step(i, u)
        })?)
    }
}

/// Stacked 2-counters sharing the node set; layer `l + 1` advances exactly in
/// the rounds where the node's own layer-`l` state moves from 1 to 0.
#[derive(Debug, Clone)]
pub struct LayeredCounter {
    layers: Vec<Algorithm>,
    radices: Vec<usize>,
}

/// Largest composite state space of a [`LayeredCounter`].
pub const MAX_COMPOSITE_STATES: usize = 1 << 16;

pub fn compose_layers(layers: &[Algorithm]) -> Result<LayeredCounter, TransformError> {
    let first = layers.first().ok_or(TransformError::EmptyComposition)?;
    let (n, f) = (first.params().n, first.params().f);
    if let Some(bad) = layers
        .iter()
        .find(|a| a.params().n != n || a.params().f != f)
    {
        return Err(TransformError::LayerMismatch(format!(
            "layer with n={} f={} next to n={n} f={f}",
            bad.params().n,
            bad.params().f
        )));
    }
    let radices: Vec<usize> = layers.iter().map(|a| a.params().s).collect();
    let total = radices
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .filter(|&t| t <= MAX_COMPOSITE_STATES);
    if total.is_none() {
        return Err(TransformError::LayerMismatch(format!(
            "composite state space exceeds {MAX_COMPOSITE_STATES}"
        )));
    }
    Ok(LayeredCounter {
        layers: layers.to_vec(),
        radices,
    })
}

impl LayeredCounter {
    pub fn layers(&self) -> &[Algorithm] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn n(&self) -> usize {
        self.layers[0].params().n
    }

    pub fn f(&self) -> usize {
        self.layers[0].params().f
    }

    /// Size of the composite per-node state space.
    pub fn states(&self) -> usize {
        self.radices.iter().product()
    }

    /// Splits a composite state into per-layer states, layer 0 first.
    pub fn unpack(&self, mut state: usize) -> Vec<u8> {
        self.radices
            .iter()
            .map(|&s| {
                let d = state % s;
                state /= s;
                d as u8
            })
            .collect()
    }

    pub fn pack(&self, digits: &[u8]) -> usize {
        self.radices
            .iter()
            .zip(digits)
            .rev()
            .fold(0, |acc, (&s, &d)| acc * s + d as usize)
    }

    /// Counter value of a composite state, layer 0 least significant; `None`
    /// while some layer is outside `{0, 1}`.
    pub fn output(&self, state: usize) -> Option<u32> {
        self.unpack(state)
            .iter()
            .enumerate()
            .try_fold(0u32, |acc, (l, &d)| (d <= 1).then(|| acc | (u32::from(d) << l)))
    }

    /// New composite state of node `i` given every node's reported composite
    /// state.
    pub fn step(&self, i: usize, observed: &[usize]) -> usize {
        let n = self.n();
        let unpacked: Vec<Vec<u8>> = observed.iter().map(|&u| self.unpack(u)).collect();
        let mut next = Vec::with_capacity(self.layers.len());
        let mut pulse = true;
        for (l, alg) in self.layers.iter().enumerate() {
            let old = unpacked[i][l];
            let new = if pulse {
                let s = self.radices[l];
                let index = (0..n).rev().fold(0usize, |acc, j| acc * s + unpacked[j][l] as usize);
                alg.transition_index(i, index)
            } else {
                old
            };
            pulse = pulse && old == 1 && new == 0;
            next.push(new);
        }
        self.pack(&next)
    }
}
