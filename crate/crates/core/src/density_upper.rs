//! Upper bounds on minimum density from configurations that are periodic along d−1 chosen vectors.
//!
//! Such configurations are bi-infinite sequences of columns `t·e₁ + D` (D a fundamental domain of
//! the lattice spanned by e₁ and the periods). A state of the transfer graph is the set of
//! translated forbidden patterns that have started to match and are not yet finished; an edge
//! reads one column.

use std::collections::{HashMap, HashSet, VecDeque};

use num_integer::Integer;
use num_rational::Ratio;
use rayon::prelude::*;
use thiserror::Error;

use crate::lattice::{integer_coordinates, Lattice, LatticeError};
use crate::logic::Alphabet;
use crate::sft::{Pattern, PeriodicPoint, Sft, SftError, DEFAULT_PATTERN_CAP};
use crate::topology::{NodeRef, Vector};

#[derive(Debug, Error)]
pub enum DensityError {
    #[error(transparent)]
    Sft(#[from] SftError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("bad period vectors: {0}")]
    Periods(String),
    #[error("the shift has no configuration with these periods (no cycle in the transfer graph)")]
    Acyclic,
    #[error("weight of symbol `{0}` given twice or symbol unknown")]
    BadWeight(String),
    #[error("the transfer graph exceeds {limit} {what}")]
    TooLarge { what: &'static str, limit: usize },
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

/// Weights of the alphabet symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightMap {
    weights: Vec<Ratio<i64>>,
}

impl WeightMap {
    pub fn new(weights: Vec<Ratio<i64>>) -> Self {
        WeightMap { weights }
    }

    /// Numeric symbols weigh their value; any other symbol weighs 1, except the first, which weighs 0.
    pub fn default_for(alphabet: &Alphabet) -> Self {
        let weights = alphabet
            .symbols()
            .iter()
            .enumerate()
            .map(|(i, s)| crate::dsl::parse_rational(s).unwrap_or(Ratio::from(i64::from(i > 0))))
            .collect();
        WeightMap { weights }
    }

    /// The defaults, overridden by the listed `(symbol, weight)` pairs.
    pub fn from_pairs(alphabet: &Alphabet, pairs: &[(String, Ratio<i64>)]) -> Result<Self, DensityError> {
        let mut w = Self::default_for(alphabet);
        let mut seen = HashSet::new();
        for (s, v) in pairs {
            let i = alphabet.index(s).ok_or_else(|| DensityError::BadWeight(s.clone()))?;
            if !seen.insert(i) {
                return Err(DensityError::BadWeight(s.clone()));
            }
            w.weights[i] = *v;
        }
        Ok(w)
    }

    pub fn get(&self, symbol: usize) -> Ratio<i64> {
        self.weights[symbol]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Integer weights and their common denominator.
    pub fn scaled(&self) -> (Vec<i64>, i64) {
        let den = self.weights.iter().fold(1i64, |acc, w| acc.lcm(w.denom()));
        (self.weights.iter().map(|w| w.numer() * (den / w.denom())).collect(), den)
    }

    /// Average weight of the symbols of `label`.
    pub fn label_density(&self, label: &[u8]) -> Ratio<i64> {
        if label.is_empty() {
            return Ratio::from(0);
        }
        let sum: Ratio<i64> = label.iter().map(|&s| self.weights[s as usize]).sum();
        sum / Ratio::from(label.len() as i64)
    }
}

/// Splits Z^d into columns `t·e₁ + D` modulo the sublattice spanned by the periods.
#[derive(Clone, Debug)]
pub struct Columns {
    basis: Vec<Vector>,
    lattice: Lattice,
    domain: Vec<Vector>,
    domain_index: HashMap<Vector, usize>,
    nodes: usize,
}

impl Columns {
    pub fn new(dimension: usize, periods: &[Vector], nodes: usize) -> Result<Self, DensityError> {
        if periods.len() + 1 != dimension {
            return Err(DensityError::Periods(format!(
                "need {} vectors transverse to the first axis, got {}",
                dimension - 1,
                periods.len()
            )));
        }
        let mut basis = vec![Vector::unit(dimension, 0)];
        for p in periods {
            if p.dim() != dimension {
                return Err(DensityError::Periods(format!("{p} has the wrong dimension")));
            }
            basis.push(p.clone());
        }
        let lattice = Lattice::new(&basis)?;
        let domain = lattice.representatives();
        let domain_index = domain.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        Ok(Columns { basis, lattice, domain, domain_index, nodes })
    }

    pub fn slots(&self) -> usize {
        self.domain.len() * self.nodes
    }

    pub fn domain(&self) -> &[Vector] {
        &self.domain
    }

    /// Column index and slot of a node.
    pub fn locate(&self, n: &NodeRef) -> (i64, usize) {
        let delta = self.lattice.reduce(&n.offset);
        let coords = integer_coordinates(&self.basis, &(&n.offset - &delta)).expect("difference lies in the lattice");
        (coords[0], self.domain_index[&delta] * self.nodes + n.node as usize)
    }

    /// The node of slot `slot` in column 0.
    pub fn slot_node(&self, slot: usize) -> NodeRef {
        NodeRef::new(self.domain[slot / self.nodes].clone(), (slot % self.nodes) as u32)
    }

    pub fn periods(&self) -> &[Vector] {
        &self.basis[1..]
    }
}

/// A forbidden pattern seen through the columns: `cols[j]` lists (slot, symbol) required in the
/// j-th column it touches.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnPattern {
    pub cols: Vec<Vec<(u16, u8)>>,
}

/// All translates of `forbidden` modulo the periods, as column patterns.
pub fn column_patterns(columns: &Columns, forbidden: &[Pattern]) -> Vec<ColumnPattern> {
    let mut out: HashSet<ColumnPattern> = HashSet::new();
    for p in forbidden {
        'shift: for delta in columns.domain() {
            let mut entries: Vec<(i64, u16, u8)> = Vec::with_capacity(p.len());
            for (n, s) in p.iter() {
                let (t, slot) = columns.locate(&n.shifted(delta));
                entries.push((t, slot as u16, s as u8));
            }
            entries.sort_unstable();
            entries.dedup();
            for w in entries.windows(2) {
                if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                    // two symbols demanded at one node: this translate never occurs
                    continue 'shift;
                }
            }
            let t0 = entries[0].0;
            let width = (entries.last().expect("nonempty").0 - t0 + 1) as usize;
            let mut cols = vec![Vec::new(); width];
            for (t, slot, s) in entries {
                cols[(t - t0) as usize].push((slot, s));
            }
            out.insert(ColumnPattern { cols });
        }
    }
    let mut v: Vec<ColumnPattern> = out.into_iter().collect();
    v.sort();
    v
}

/// Pending matches: (column pattern, number of columns already matched).
pub type StateKey = Vec<(u32, u16)>;

struct Explorer<'a> {
    cps: &'a [ColumnPattern],
    slots: usize,
    symbols: usize,
    weights: &'a [i64],
}

struct Search<'s> {
    entries: Vec<(u32, u16, bool)>,
    by_slot: Vec<Vec<(u32, u8)>>,
    remaining: Vec<u32>,
    mismatch: Vec<u32>,
    label: Vec<u8>,
    weights: &'s [i64],
    symbols: usize,
}

impl Search<'_> {
    fn run(&mut self, slot: usize, weight: i64, sink: &mut dyn FnMut(&[u8], i64, StateKey)) {
        if slot == self.label.len() {
            let mut key: StateKey = self
                .entries
                .iter()
                .enumerate()
                .filter(|(e, (_, _, terminal))| !terminal && self.mismatch[*e] == 0)
                .map(|(_, (cp, j, _))| (*cp, j + 1))
                .collect();
            key.sort_unstable();
            sink(&self.label, weight, key);
            return;
        }
        for a in 0..self.symbols as u8 {
            let mut dead = false;
            for &(e, s) in &self.by_slot[slot] {
                let e = e as usize;
                if s != a {
                    self.mismatch[e] += 1;
                } else {
                    self.remaining[e] -= 1;
                    if self.remaining[e] == 0 && self.mismatch[e] == 0 && self.entries[e].2 {
                        dead = true;
                    }
                }
            }
            if !dead {
                self.label[slot] = a;
                self.run(slot + 1, weight + self.weights[a as usize], sink);
            }
            for &(e, s) in &self.by_slot[slot] {
                let e = e as usize;
                if s != a {
                    self.mismatch[e] -= 1;
                } else {
                    self.remaining[e] += 1;
                }
            }
        }
    }
}

impl Explorer<'_> {
    /// Calls `sink(label, weight, target)` for every column label that does not complete a pattern.
    fn successors(&self, state: &StateKey, sink: &mut dyn FnMut(&[u8], i64, StateKey)) {
        let mut entries: Vec<(u32, u16, bool)> = Vec::with_capacity(state.len() + self.cps.len());
        let push = |entries: &mut Vec<(u32, u16, bool)>, cp: u32, j: u16| {
            let len = self.cps[cp as usize].cols.len();
            entries.push((cp, j, j as usize + 1 == len));
        };
        for &(cp, j) in state {
            push(&mut entries, cp, j);
        }
        for cp in 0..self.cps.len() as u32 {
            push(&mut entries, cp, 0);
        }
        let mut by_slot = vec![Vec::new(); self.slots];
        let mut remaining = Vec::with_capacity(entries.len());
        for (e, &(cp, j, terminal)) in entries.iter().enumerate() {
            let col = &self.cps[cp as usize].cols[j as usize];
            if col.is_empty() && terminal {
                return;
            }
            for &(slot, s) in col {
                by_slot[slot as usize].push((e as u32, s));
            }
            remaining.push(col.len() as u32);
        }
        let n = entries.len();
        let mut search = Search {
            entries,
            by_slot,
            remaining,
            mismatch: vec![0; n],
            label: vec![0; self.slots],
            weights: self.weights,
            symbols: self.symbols,
        };
        search.run(0, 0, sink);
    }
}

/// Size caps for the transfer graph, checked while it is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_states: usize,
    pub max_edges: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_states: 4_000_000, max_edges: 16_000_000 }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, DensityError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| DensityError::Pool(e.to_string()))
}

const EXPAND_BATCH: usize = 4096;

/// Breadth-first exploration from the empty state; `expand` lists (target, payload) per state.
fn explore<T: Send>(
    workers: usize,
    limits: Limits,
    expand: impl Fn(&StateKey) -> Vec<(StateKey, T)> + Sync,
) -> Result<(Vec<StateKey>, Vec<(u32, u32, T)>), DensityError> {
    let pool = pool(workers)?;
    let mut states: Vec<StateKey> = vec![Vec::new()];
    let mut index: HashMap<StateKey, u32> = HashMap::from([(Vec::new(), 0)]);
    let mut edges = Vec::new();
    let mut frontier: Vec<u32> = vec![0];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        // expanded in batches so the limits are checked before a whole level is in memory
        for batch in frontier.chunks(EXPAND_BATCH) {
            let results: Vec<Vec<(StateKey, T)>> =
                pool.install(|| batch.par_iter().map(|&s| expand(&states[s as usize])).collect());
            for (&src, outs) in batch.iter().zip(results) {
                for (key, payload) in outs {
                    let dst = match index.get(&key) {
                        Some(&d) => d,
                        None => {
                            let d = states.len() as u32;
                            if states.len() >= limits.max_states {
                                return Err(DensityError::TooLarge { what: "states", limit: limits.max_states });
                            }
                            index.insert(key.clone(), d);
                            states.push(key);
                            next.push(d);
                            d
                        }
                    };
                    if edges.len() >= limits.max_edges {
                        return Err(DensityError::TooLarge { what: "edges", limit: limits.max_edges });
                    }
                    edges.push((src, dst, payload));
                }
            }
        }
        frontier = next;
    }
    Ok((states, edges))
}

/// An edge of the transfer graph labelled by the column it writes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledEdge {
    pub src: u32,
    pub dst: u32,
    pub label: Vec<u8>,
}

/// The full transfer graph: every column label on every edge.
#[derive(Clone, Debug)]
pub struct PeriodGraph {
    pub columns: Columns,
    pub patterns: Vec<ColumnPattern>,
    pub states: Vec<StateKey>,
    pub edges: Vec<LabeledEdge>,
}

fn prepare(x: &Sft, periods: &[Vector]) -> Result<(Columns, Vec<ColumnPattern>), DensityError> {
    let columns = Columns::new(x.topology().dimension(), periods, x.topology().node_count())?;
    let forbidden = x.minimal_forbidden(DEFAULT_PATTERN_CAP)?;
    let cps = column_patterns(&columns, forbidden);
    Ok((columns, cps))
}

pub fn build_period_graph(x: &Sft, periods: &[Vector], workers: usize) -> Result<PeriodGraph, DensityError> {
    let (columns, cps) = prepare(x, periods)?;
    let zeros = vec![0i64; x.alphabet().len()];
    let ex = Explorer { cps: &cps, slots: columns.slots(), symbols: x.alphabet().len(), weights: &zeros };
    let (states, edges) = explore(workers, Limits::default(), |s| {
        let mut out = Vec::new();
        ex.successors(s, &mut |label, _, key| out.push((key, label.to_vec())));
        out
    })?;
    let edges = edges.into_iter().map(|(src, dst, label)| LabeledEdge { src, dst, label }).collect();
    Ok(PeriodGraph { columns, patterns: cps, states, edges })
}

impl PeriodGraph {
    /// Replaces labels by their densities, keeping them for reference.
    pub fn weight_labels(&self, w: &WeightMap) -> Vec<(u32, u32, Ratio<i64>)> {
        self.edges.iter().map(|e| (e.src, e.dst, w.label_density(&e.label))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WEdge {
    pub src: u32,
    pub dst: u32,
    pub weight: i64,
}

/// A digraph with integer edge labels (weights).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WeightedGraph {
    pub vertices: usize,
    pub edges: Vec<WEdge>,
}

impl WeightedGraph {
    pub fn new(vertices: usize, mut edges: Vec<WEdge>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        WeightedGraph { vertices, edges }
    }
}

/// Partition refinement: merges vertices with equal sets of (label, target block), to a fixpoint.
/// Returns the quotient and the block of every vertex.
pub fn reduce(g: &WeightedGraph) -> (WeightedGraph, Vec<u32>) {
    let mut out: Vec<Vec<(i64, u32)>> = vec![Vec::new(); g.vertices];
    for e in &g.edges {
        out[e.src as usize].push((e.weight, e.dst));
    }
    let mut block = vec![0u32; g.vertices];
    let mut count = usize::from(g.vertices > 0);
    loop {
        let mut ids: HashMap<(u32, Vec<(i64, u32)>), u32> = HashMap::new();
        let mut next = Vec::with_capacity(g.vertices);
        for v in 0..g.vertices {
            let mut sig: Vec<(i64, u32)> = out[v].iter().map(|&(w, d)| (w, block[d as usize])).collect();
            sig.sort_unstable();
            sig.dedup();
            let n = ids.len() as u32;
            next.push(*ids.entry((block[v], sig)).or_insert(n));
        }
        let new_count = ids.len();
        block = next;
        if new_count == count {
            break;
        }
        count = new_count;
    }
    let edges = g
        .edges
        .iter()
        .map(|e| WEdge { src: block[e.src as usize], dst: block[e.dst as usize], weight: e.weight })
        .collect();
    (WeightedGraph::new(count, edges), block)
}

/// Keeps only the lightest edge between each ordered pair of vertices.
pub fn prune_parallel(g: &WeightedGraph) -> WeightedGraph {
    let mut best: HashMap<(u32, u32), i64> = HashMap::new();
    for e in &g.edges {
        let w = best.entry((e.src, e.dst)).or_insert(e.weight);
        *w = (*w).min(e.weight);
    }
    let edges = best.into_iter().map(|((src, dst), weight)| WEdge { src, dst, weight }).collect();
    WeightedGraph::new(g.vertices, edges)
}

/// Removes vertices without a predecessor or successor, repeatedly; returns the new index of each
/// old vertex.
pub fn trim(g: &WeightedGraph) -> (WeightedGraph, Vec<Option<u32>>) {
    let n = g.vertices;
    let mut alive = vec![true; n];
    let (mut indeg, mut outdeg) = (vec![0usize; n], vec![0usize; n]);
    let mut ins: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut outs: Vec<Vec<u32>> = vec![Vec::new(); n];
    for e in &g.edges {
        outdeg[e.src as usize] += 1;
        indeg[e.dst as usize] += 1;
        outs[e.src as usize].push(e.dst);
        ins[e.dst as usize].push(e.src);
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0 || outdeg[v] == 0).collect();
    while let Some(v) = queue.pop_front() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &d in &outs[v] {
            let d = d as usize;
            indeg[d] -= 1;
            if alive[d] && indeg[d] == 0 {
                queue.push_back(d);
            }
        }
        for &s in &ins[v] {
            let s = s as usize;
            outdeg[s] -= 1;
            if alive[s] && outdeg[s] == 0 {
                queue.push_back(s);
            }
        }
    }
    let mut map = vec![None; n];
    let mut k = 0u32;
    for v in 0..n {
        if alive[v] {
            map[v] = Some(k);
            k += 1;
        }
    }
    let edges = g
        .edges
        .iter()
        .filter_map(|e| Some(WEdge { src: map[e.src as usize]?, dst: map[e.dst as usize]?, weight: e.weight }))
        .collect();
    (WeightedGraph::new(k as usize, edges), map)
}

/// A cycle of minimum mean weight.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeanCycle {
    pub mean: Ratio<i64>,
    pub cycle: Vec<WEdge>,
}

const INF: i64 = i64::MAX / 4;

fn karp_row(incoming: &[Vec<(u32, i64)>], prev: &[i64], pool: &rayon::ThreadPool) -> Vec<i64> {
    pool.install(|| {
        incoming
            .par_iter()
            .map(|ins| {
                ins.iter()
                    .filter(|(u, _)| prev[*u as usize] < INF)
                    .map(|(u, w)| prev[*u as usize] + w)
                    .min()
                    .unwrap_or(INF)
            })
            .collect()
    })
}

/// Karp's minimum mean cycle, with a virtual source joined to every vertex. Rows of the dynamic
/// program are recomputed in a second pass instead of stored.
pub fn min_mean_cycle(g: &WeightedGraph, workers: usize) -> Result<MeanCycle, DensityError> {
    let n = g.vertices;
    if n == 0 {
        return Err(DensityError::Acyclic);
    }
    let pool = pool(workers)?;
    let mut incoming: Vec<Vec<(u32, i64)>> = vec![Vec::new(); n];
    for e in &g.edges {
        incoming[e.dst as usize].push((e.src, e.weight));
    }
    let mut row = vec![0i64; n];
    for _ in 0..n {
        row = karp_row(&incoming, &row, &pool);
    }
    let last = row;
    // best[v] = max_k (D_n(v) − D_k(v)) / (n − k)
    let mut best: Vec<Option<(i64, i64)>> = vec![None; n];
    let mut row = vec![0i64; n];
    for k in 0..n {
        for v in 0..n {
            if last[v] >= INF || row[v] >= INF {
                continue;
            }
            let cand = (last[v] - row[v], (n - k) as i64);
            let better = match best[v] {
                None => true,
                Some((a, b)) => (cand.0 as i128) * (b as i128) > (a as i128) * (cand.1 as i128),
            };
            if better {
                best[v] = Some(cand);
            }
        }
        if k + 1 < n {
            row = karp_row(&incoming, &row, &pool);
        }
    }
    let (p, q) = best
        .into_iter()
        .flatten()
        .min_by(|x, y| ((x.0 as i128) * (y.1 as i128)).cmp(&((y.0 as i128) * (x.1 as i128))))
        .ok_or(DensityError::Acyclic)?;
    let mean = Ratio::new(p, q);
    let cycle = tight_cycle(g, *mean.numer(), *mean.denom());
    Ok(MeanCycle { mean, cycle })
}

/// A cycle of mean exactly p/q, found among edges that are tight for shortest-path potentials
/// under the shifted weights q·w − p (which admit no negative cycle).
fn tight_cycle(g: &WeightedGraph, p: i64, q: i64) -> Vec<WEdge> {
    let n = g.vertices;
    let w = |e: &WEdge| (q as i128) * (e.weight as i128) - p as i128;
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in g.edges.iter().enumerate() {
        out[e.src as usize].push(i);
    }
    let mut dist = vec![0i128; n];
    let mut queued = vec![true; n];
    let mut queue: VecDeque<usize> = (0..n).collect();
    while let Some(u) = queue.pop_front() {
        queued[u] = false;
        for &i in &out[u] {
            let e = &g.edges[i];
            let nd = dist[u] + w(e);
            let v = e.dst as usize;
            if nd < dist[v] {
                dist[v] = nd;
                if !queued[v] {
                    queued[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|u| out[u].iter().copied().filter(|&i| dist[u] + w(&g.edges[i]) == dist[g.edges[i].dst as usize]).collect())
        .collect();
    // iterative DFS for a cycle in the tight subgraph
    let mut color = vec![0u8; n];
    for start in 0..n {
        if color[start] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        let mut via: Vec<usize> = Vec::new();
        color[start] = 1;
        while let Some(&mut (u, ref mut k)) = stack.last_mut() {
            if *k < tight[u].len() {
                let i = tight[u][*k];
                *k += 1;
                let v = g.edges[i].dst as usize;
                if color[v] == 1 {
                    let pos = stack.iter().position(|(x, _)| *x == v).expect("on stack");
                    let mut cyc: Vec<WEdge> = via[pos..].iter().map(|&j| g.edges[j]).collect();
                    cyc.push(g.edges[i]);
                    return cyc;
                }
                if color[v] == 0 {
                    color[v] = 1;
                    stack.push((v, 0));
                    via.push(i);
                }
            } else {
                color[u] = 2;
                stack.pop();
                via.pop();
            }
        }
    }
    unreachable!("a minimum mean cycle is tight for the shifted potentials")
}

/// Same as [`min_mean_cycle`] for rational weights.
pub fn min_mean_cycle_rational(
    vertices: usize,
    edges: &[(u32, u32, Ratio<i64>)],
    workers: usize,
) -> Result<(Ratio<i64>, Vec<(u32, u32)>), DensityError> {
    let den = edges.iter().fold(1i64, |acc, e| acc.lcm(e.2.denom()));
    let scaled: Vec<WEdge> = edges
        .iter()
        .map(|&(src, dst, w)| WEdge { src, dst, weight: w.numer() * (den / w.denom()) })
        .collect();
    let g = WeightedGraph::new(vertices, scaled);
    let mc = min_mean_cycle(&g, workers)?;
    Ok((mc.mean / Ratio::from(den), mc.cycle.iter().map(|e| (e.src, e.dst)).collect()))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PipelineStats {
    pub column_patterns: usize,
    pub slots: usize,
    pub initial_vertices: usize,
    pub initial_edges: usize,
    pub final_vertices: usize,
    pub final_edges: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpperBound {
    pub bound: Ratio<i64>,
    /// A configuration of the shift, periodic along the given vectors, of density `bound`.
    pub witness: PeriodicPoint,
    pub stats: PipelineStats,
}

/// Minimum density over configurations of `x` periodic along `periods`, an upper bound for the
/// minimum density of `x`.
pub fn minimum_density_upper(
    x: &Sft,
    periods: &[Vector],
    w: &WeightMap,
    workers: usize,
) -> Result<UpperBound, DensityError> {
    minimum_density_upper_with(x, periods, w, workers, Limits::default())
}

pub fn minimum_density_upper_with(
    x: &Sft,
    periods: &[Vector],
    w: &WeightMap,
    workers: usize,
    limits: Limits,
) -> Result<UpperBound, DensityError> {
    let (columns, cps) = prepare(x, periods)?;
    let (iw, den) = w.scaled();
    let ex = Explorer { cps: &cps, slots: columns.slots(), symbols: x.alphabet().len(), weights: &iw };
    // only the lightest (then least) label towards each target matters for the minimum
    let (_, raw) = explore(workers, limits, |s| {
        let mut best: HashMap<StateKey, (i64, Vec<u8>)> = HashMap::new();
        ex.successors(s, &mut |label, weight, key| match best.get_mut(&key) {
            Some(b) => {
                if (weight, label) < (b.0, b.1.as_slice()) {
                    *b = (weight, label.to_vec());
                }
            }
            None => {
                best.insert(key, (weight, label.to_vec()));
            }
        });
        let mut v: Vec<(StateKey, (i64, Vec<u8>))> = best.into_iter().collect();
        v.sort();
        v
    })?;
    let vertices = raw.iter().map(|e| e.0.max(e.1) as usize + 1).max().unwrap_or(1);
    let mut labels: HashMap<(u32, u32), Vec<u8>> = HashMap::new();
    let mut edges = Vec::with_capacity(raw.len());
    for (src, dst, (weight, label)) in raw {
        edges.push(WEdge { src, dst, weight });
        labels.insert((src, dst), label);
    }
    let g0 = WeightedGraph::new(vertices, edges);
    let mut stats = PipelineStats {
        column_patterns: cps.len(),
        slots: columns.slots(),
        initial_vertices: g0.vertices,
        initial_edges: g0.edges.len(),
        ..Default::default()
    };

    // phi: original vertex -> vertex of the current graph
    let mut phi: Vec<Option<u32>> = (0..g0.vertices as u32).map(Some).collect();
    let mut g = g0.clone();
    loop {
        let (t, map) = trim(&g);
        let (r, blocks) = reduce(&t);
        let p = prune_parallel(&r);
        for f in phi.iter_mut() {
            *f = f.and_then(|v| map[v as usize]).map(|v| blocks[v as usize]);
        }
        let done = p.vertices == g.vertices && p.edges.len() == g.edges.len();
        g = p;
        if done {
            break;
        }
    }
    stats.final_vertices = g.vertices;
    stats.final_edges = g.edges.len();
    let mc = min_mean_cycle(&g, workers)?;
    let bound = mc.mean / Ratio::from(den * columns.slots() as i64);

    let lifted = lift_cycle(&g0, &phi, &mc.cycle);
    let column_labels: Vec<&Vec<u8>> = lifted.iter().map(|e| &labels[&(e.src, e.dst)]).collect();
    let witness = periodic_witness(&columns, &column_labels)?;
    Ok(UpperBound { bound, witness, stats })
}

/// Follows `cycle` (in the reduced graph) through the original graph until a state repeats.
fn lift_cycle(g0: &WeightedGraph, phi: &[Option<u32>], cycle: &[WEdge]) -> Vec<WEdge> {
    let len = cycle.len();
    let mut out: Vec<Vec<WEdge>> = vec![Vec::new(); g0.vertices];
    for e in &g0.edges {
        out[e.src as usize].push(*e);
    }
    let mut s = (0..g0.vertices).find(|&v| phi[v] == Some(cycle[0].src)).expect("block is nonempty") as u32;
    let mut seen: HashMap<(u32, usize), usize> = HashMap::new();
    let mut path: Vec<WEdge> = Vec::new();
    let mut i = 0usize;
    loop {
        if let Some(&start) = seen.get(&(s, i % len)) {
            return path[start..].to_vec();
        }
        seen.insert((s, i % len), path.len());
        let step = &cycle[i % len];
        let e = *out[s as usize]
            .iter()
            .find(|e| e.weight == step.weight && phi[e.dst as usize] == Some(step.dst))
            .expect("reduction is a bisimulation");
        path.push(e);
        s = e.dst;
        i += 1;
    }
}

fn periodic_witness(columns: &Columns, labels: &[&Vec<u8>]) -> Result<PeriodicPoint, DensityError> {
    let d = columns.basis[0].dim();
    let len = labels.len() as i64;
    let mut gens = vec![Vector::unit(d, 0).scale(len as i32)];
    gens.extend(columns.periods().iter().cloned());
    let lattice = Lattice::new(&gens)?;
    let mut pattern = Pattern::new();
    for cell in lattice.representatives() {
        for r in 0..columns.nodes as u32 {
            let n = NodeRef::new(cell.clone(), r);
            let (t, slot) = columns.locate(&n);
            pattern.insert(n, labels[t.rem_euclid(len) as usize][slot] as usize);
        }
    }
    Ok(PeriodicPoint { lattice, pattern })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_formula;
    use crate::topology::Topology;

    fn line_sft(src: &str) -> Sft {
        Sft::from_formula(&Topology::builtin("line").unwrap(), &Alphabet::binary(), &parse_formula(src).unwrap())
            .unwrap()
    }

    fn r(a: i64, b: i64) -> Ratio<i64> {
        Ratio::new(a, b)
    }

    #[test]
    fn karp_small_cases() {
        let (m, _) = min_mean_cycle_rational(1, &[(0, 0, r(2, 5))], 1).unwrap();
        assert_eq!(m, r(2, 5));
        let tri = [(0, 1, r(1, 1)), (1, 2, r(2, 1)), (2, 0, r(3, 1)), (1, 1, r(3, 2))];
        let (m, c) = min_mean_cycle_rational(3, &tri, 2).unwrap();
        assert_eq!(m, r(3, 2));
        assert_eq!(c, vec![(1, 1)]);
        assert!(matches!(min_mean_cycle_rational(2, &[(0, 1, r(1, 1))], 1), Err(DensityError::Acyclic)));
    }

    #[test]
    fn prune_and_reduce_examples() {
        let g = WeightedGraph::new(2, vec![WEdge { src: 0, dst: 1, weight: 3 }, WEdge { src: 0, dst: 1, weight: 2 }]);
        assert_eq!(prune_parallel(&g).edges, vec![WEdge { src: 0, dst: 1, weight: 2 }]);
        // 1 and 2 are twins
        let e = |s, d, w| WEdge { src: s, dst: d, weight: w };
        let g = WeightedGraph::new(3, vec![e(0, 1, 1), e(0, 2, 1), e(1, 0, 0), e(2, 0, 0)]);
        let (q, blocks) = reduce(&g);
        assert_eq!(q.vertices, 2);
        assert_eq!(blocks[1], blocks[2]);
        let g = WeightedGraph::new(2, vec![e(0, 1, 1), e(1, 0, 0)]);
        assert_eq!(reduce(&g).0, g);
    }

    #[test]
    fn full_shift_graph_is_one_state() {
        let full = line_sft("Ao o = o");
        let g = build_period_graph(&full, &[], 1).unwrap();
        assert_eq!(g.states.len(), 1);
        assert_eq!(g.edges.len(), 2);
    }

    #[test]
    fn dominating_set_on_the_line() {
        let dom = line_sft("Ao Ed[o1] d = 1");
        let ub = minimum_density_upper(&dom, &[], &WeightMap::default_for(&Alphabet::binary()), 2).unwrap();
        assert_eq!(ub.bound, r(1, 3));
        assert_eq!(ub.witness.lattice.index(), 3);
    }

    #[test]
    fn golden_mean_minimising_zeros() {
        let gm = line_sft("Ao o = 1 -> o.rt = 0");
        let w = WeightMap::new(vec![r(1, 1), r(0, 1)]);
        assert_eq!(minimum_density_upper(&gm, &[], &w, 1).unwrap().bound, r(1, 2));
    }

    #[test]
    fn label_weights() {
        let w = WeightMap::default_for(&Alphabet::binary());
        assert_eq!(w.label_density(&[0, 1]), r(1, 2));
        assert_eq!(w.label_density(&[0, 0, 0]), r(0, 1));
    }
}
