//! Cellular automata on full shifts as |R|·|A| circuits over input indicators.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dsl::CaRule;
use crate::lattice::Lattice;
use crate::logic::{ground, Alphabet, Circuit, CircuitBuilder, GateId, GroundError, GroundMode, SatError, SatInstance, VarId};
use crate::sft::Pattern;
use crate::topology::{NodeRef, Topology, Vector};

#[derive(Debug, Error)]
pub enum BlockMapError {
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("symbol `{0}` is not in the alphabet")]
    UnknownSymbol(String),
    #[error("rule is not deterministic: node {node} can be given both {first} and {second}, e.g. on input {witness}")]
    Overlap { node: String, first: String, second: String, witness: String },
    #[error("rule for node {node} writes no symbol on input {witness}")]
    NotExhaustive { node: String, witness: String },
    #[error("the automata live on different topologies or alphabets")]
    Mismatch,
    #[error("cannot compose an empty list")]
    EmptyComposition,
    #[error("failed to write the log: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct BlockMap {
    topology: Topology,
    alphabet: Alphabet,
    /// `rules[r][s]`: the output at node r of the origin cell is s
    rules: Vec<Vec<Circuit>>,
}

/// Whether two automata agree, or a node and input on which they differ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CaEquality {
    Equal,
    Different { node: u32, witness: Pattern },
}

fn decode_witness(inst: &SatInstance, nodes: &BTreeSet<NodeRef>) -> Pattern {
    nodes.iter().map(|n| (n.clone(), inst.symbol_at(n).unwrap_or(0))).collect()
}

impl BlockMap {
    pub fn from_rules(topology: Topology, alphabet: Alphabet, rules: Vec<Vec<Circuit>>) -> Self {
        BlockMap { topology, alphabet, rules }
    }

    /// Builds a CA from `node symbol formula` preimage rules, checking determinism.
    pub fn define(topology: &Topology, alphabet: &Alphabet, preimages: &[CaRule]) -> Result<Self, BlockMapError> {
        let r_count = topology.node_count();
        let m = alphabet.len();
        let origin = Vector::zero(topology.dimension());
        let mut listed: Vec<Vec<Option<Circuit>>> = vec![vec![None; m]; r_count];
        for rule in preimages {
            let r = topology.node_index(&rule.node).ok_or_else(|| BlockMapError::UnknownNode(rule.node.clone()))?;
            let s = alphabet.index(&rule.symbol).ok_or_else(|| BlockMapError::UnknownSymbol(rule.symbol.clone()))?;
            let c = ground(&rule.formula, topology, alphabet, &origin, GroundMode::CaRule { node: r })?;
            let slot = &mut listed[r as usize][s];
            *slot = Some(match slot.take() {
                None => c,
                Some(prev) => {
                    let mut b = CircuitBuilder::new();
                    let x = b.import(&prev, |b, v| b.var(v.clone()));
                    let y = b.import(&c, |b, v| b.var(v.clone()));
                    let o = b.or2(x, y);
                    b.finish(o)
                }
            });
        }
        let mut rules = Vec::with_capacity(r_count);
        for (r, row) in listed.into_iter().enumerate() {
            let node_name = topology.node_name(r as u32).to_string();
            let given: Vec<(usize, Circuit)> =
                row.iter().enumerate().filter_map(|(s, c)| c.clone().map(|c| (s, c))).collect();
            for (i, (a, ca)) in given.iter().enumerate() {
                for (b, cb) in &given[i + 1..] {
                    let mut inst = SatInstance::new(m);
                    inst.assert(ca, &origin);
                    inst.assert(cb, &origin);
                    if inst.solve(&[])? {
                        let support: BTreeSet<NodeRef> = ca.support().union(&cb.support()).cloned().collect();
                        return Err(BlockMapError::Overlap {
                            node: node_name,
                            first: alphabet.name(*a).to_string(),
                            second: alphabet.name(*b).to_string(),
                            witness: decode_witness(&inst, &support).display(topology, alphabet),
                        });
                    }
                }
            }
            // the first unlisted symbol is written whenever no listed rule fires
            let default = (0..m).find(|s| row[*s].is_none());
            let mut b = CircuitBuilder::new();
            let gates: Vec<GateId> = given.iter().map(|(_, c)| b.import(c, |b, v| b.var(v.clone()))).collect();
            let any = b.or(gates);
            if default.is_none() {
                let mut inst = SatInstance::new(m);
                let none = b.not(any);
                let none = b.finish(none);
                inst.assert(&none, &origin);
                if inst.solve(&[])? {
                    return Err(BlockMapError::NotExhaustive {
                        node: node_name,
                        witness: decode_witness(&inst, &none.support()).display(topology, alphabet),
                    });
                }
            }
            let complement = {
                let n = b.not(any);
                b.finish(n)
            };
            let row: Vec<Circuit> = row
                .into_iter()
                .enumerate()
                .map(|(s, c)| match c {
                    Some(c) => c,
                    None if Some(s) == default => complement.clone(),
                    None => Circuit::constant(false),
                })
                .collect();
            rules.push(row);
        }
        Ok(BlockMap { topology: topology.clone(), alphabet: alphabet.clone(), rules })
    }

    pub fn identity(topology: &Topology, alphabet: &Alphabet) -> Self {
        let origin = Vector::zero(topology.dimension());
        let rules = (0..topology.node_count() as u32)
            .map(|r| {
                let n = NodeRef::new(origin.clone(), r);
                (0..alphabet.len())
                    .map(|s| {
                        let mut b = CircuitBuilder::new();
                        let g = crate::logic::indicator(&mut b, alphabet, &n, s);
                        b.finish(g)
                    })
                    .collect()
            })
            .collect();
        BlockMap { topology: topology.clone(), alphabet: alphabet.clone(), rules }
    }

    /// The constant map onto the first symbol.
    pub fn zero(topology: &Topology, alphabet: &Alphabet) -> Self {
        let row: Vec<Circuit> = (0..alphabet.len()).map(|s| Circuit::constant(s == 0)).collect();
        BlockMap { topology: topology.clone(), alphabet: alphabet.clone(), rules: vec![row; topology.node_count()] }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn rule(&self, node: u32, symbol: usize) -> &Circuit {
        &self.rules[node as usize][symbol]
    }

    /// Union of the supports of all rules, relative to the origin cell.
    pub fn neighbourhood(&self) -> BTreeSet<NodeRef> {
        self.rules.iter().flatten().flat_map(|c| c.support()).collect()
    }

    pub fn circuit_size(&self) -> usize {
        self.rules.iter().flatten().map(Circuit::size).sum()
    }

    fn compatible(&self, other: &BlockMap) -> Result<(), BlockMapError> {
        if self.topology != other.topology || self.alphabet != other.alphabet {
            return Err(BlockMapError::Mismatch);
        }
        Ok(())
    }

    /// Output symbol at node `node` of cell `cell`, reading inputs from `input`.
    pub fn output_at(&self, cell: &Vector, node: u32, mut input: impl FnMut(&NodeRef) -> usize) -> usize {
        let row = &self.rules[node as usize];
        (1..row.len())
            .find(|&s| row[s].eval_symbols(|n| input(&n.shifted(cell))))
            .unwrap_or(0)
    }

    /// `self ∘ g`: apply `g` first.
    pub fn compose(&self, g: &BlockMap) -> Result<BlockMap, BlockMapError> {
        self.compatible(g)?;
        let mut b = CircuitBuilder::new();
        let mut memo: HashMap<(NodeRef, u16), GateId> = HashMap::new();
        let mut rules = Vec::with_capacity(self.rules.len());
        for row in &self.rules {
            let mut out = Vec::with_capacity(row.len());
            for c in row {
                let root = b.import(c, |b, v| match v {
                    VarId::NodeSymbol { node, symbol } => {
                        if let Some(&id) = memo.get(&(node.clone(), *symbol)) {
                            return id;
                        }
                        let inner = &g.rules[node.node as usize][*symbol as usize];
                        let id = b.import(inner, |b, w| match w {
                            VarId::NodeSymbol { node: m, symbol: t } => {
                                b.var(VarId::NodeSymbol { node: m.shifted(&node.offset), symbol: *t })
                            }
                            other => b.var(other.clone()),
                        });
                        memo.insert((node.clone(), *symbol), id);
                        id
                    }
                    other => b.var(other.clone()),
                });
                out.push(b.finish(root));
            }
            rules.push(out);
        }
        Ok(BlockMap { topology: self.topology.clone(), alphabet: self.alphabet.clone(), rules })
    }

    /// Folds `compose` over a word: `[f, g, h]` is f ∘ g ∘ h.
    pub fn compose_all(parts: &[&BlockMap]) -> Result<BlockMap, BlockMapError> {
        let (last, rest) = parts.split_last().ok_or(BlockMapError::EmptyComposition)?;
        let mut acc = (*last).clone();
        for f in rest.iter().rev() {
            acc = f.compose(&acc)?;
        }
        Ok(acc)
    }

    /// Compares the two automata with one SAT call per (node, non-default symbol).
    pub fn equal(&self, other: &BlockMap) -> Result<CaEquality, BlockMapError> {
        self.compatible(other)?;
        let origin = Vector::zero(self.topology.dimension());
        let m = self.alphabet.len();
        for r in 0..self.rules.len() {
            for s in 1..m {
                let (f, g) = (&self.rules[r][s], &other.rules[r][s]);
                if f == g {
                    continue;
                }
                let mut b = CircuitBuilder::new();
                let x = b.import(f, |b, v| b.var(v.clone()));
                let y = b.import(g, |b, v| b.var(v.clone()));
                let d = b.xor(x, y);
                let diff = b.finish(d);
                let mut inst = SatInstance::new(m);
                inst.assert(&diff, &origin);
                if inst.solve(&[])? {
                    let mut support = self.neighbourhood();
                    support.extend(other.neighbourhood());
                    support.iter().for_each(|n| inst.declare_node(n));
                    let _ = inst.solve(&[])?;
                    return Ok(CaEquality::Different { node: r as u32, witness: decode_witness(&inst, &support) });
                }
            }
        }
        Ok(CaEquality::Equal)
    }

    /// Outputs on a fixed family of random periodic inputs; equal automata have equal fingerprints.
    pub fn fingerprint(&self) -> Vec<u8> {
        const PERIOD: i32 = 6;
        const SAMPLES: usize = 4;
        let d = self.topology.dimension();
        let lattice = Lattice::diagonal(d, PERIOD);
        let reps = lattice.representatives();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let m = self.alphabet.len();
        let mut out = Vec::new();
        for _ in 0..SAMPLES {
            let input: HashMap<NodeRef, usize> = reps
                .iter()
                .flat_map(|c| self.topology.cell_nodes(c))
                .map(|n| (n, rng.gen_range(0..m)))
                .collect();
            let read = |n: &NodeRef| input[&NodeRef::new(lattice.reduce(&n.offset), n.node)];
            for c in &reps {
                for r in 0..self.rules.len() as u32 {
                    out.push(self.output_at(c, r, read) as u8);
                }
            }
        }
        out
    }
}

/// Result of exploring the semigroup generated by a set of automata.
#[derive(Clone, Debug)]
pub struct BallReport {
    /// Number of new elements found at each depth, starting with the identity at depth 0.
    pub frontier_sizes: Vec<usize>,
    pub total: usize,
    pub relations: Vec<(String, String)>,
    /// Words of the retained elements, in discovery order.
    pub words: Vec<String>,
}

fn render(word: &[usize], names: &[String]) -> String {
    if word.is_empty() {
        return "identity".to_string();
    }
    word.iter().map(|&i| names[i].as_str()).collect::<Vec<_>>().join(" ")
}

/// Breadth-first enumeration of compositions of `generators` up to length `bound`, logging
/// new elements and relations to `sink`.
pub fn ca_ball(
    generators: &[(String, BlockMap)],
    bound: usize,
    sink: &mut dyn Write,
) -> Result<BallReport, BlockMapError> {
    let names: Vec<String> = generators.iter().map(|(n, _)| n.clone()).collect();
    let Some((_, first)) = generators.first() else {
        return Ok(BallReport { frontier_sizes: vec![], total: 0, relations: vec![], words: vec![] });
    };
    for (_, g) in generators {
        first.compatible(g)?;
    }
    let identity = BlockMap::identity(&first.topology, &first.alphabet);
    // retained elements: (word, map, fingerprint)
    let mut retained: Vec<(Vec<usize>, BlockMap, Vec<u8>)> = Vec::new();
    let mut by_print: HashMap<Vec<u8>, Vec<usize>> = HashMap::new();
    let fp = identity.fingerprint();
    by_print.entry(fp.clone()).or_default().push(0);
    retained.push((Vec::new(), identity, fp));
    writeln!(sink, "Frontier size 1 at depth 0; total number of CA 1.")?;
    let mut frontier = vec![0usize];
    let mut report = BallReport { frontier_sizes: vec![1], total: 1, relations: Vec::new(), words: vec!["identity".into()] };

    for depth in 1..=bound {
        let jobs: Vec<(usize, usize)> =
            frontier.iter().flat_map(|&w| (0..generators.len()).map(move |g| (w, g))).collect();
        let candidates: Vec<Result<(Vec<usize>, BlockMap, Vec<u8>), BlockMapError>> = jobs
            .par_iter()
            .map(|&(w, g)| {
                let (word, map, _) = &retained[w];
                let composed = map.compose(&generators[g].1)?;
                let mut word = word.clone();
                word.push(g);
                let fp = composed.fingerprint();
                Ok((word, composed, fp))
            })
            .collect();
        let mut next = Vec::new();
        for cand in candidates {
            let (word, map, fp) = cand?;
            let mut duplicate = None;
            for &i in by_print.get(&fp).map(Vec::as_slice).unwrap_or(&[]) {
                if retained[i].1.equal(&map)? == CaEquality::Equal {
                    duplicate = Some(i);
                    break;
                }
            }
            match duplicate {
                Some(i) => {
                    let (old, new) = (render(&retained[i].0, &names), render(&word, &names));
                    writeln!(sink, "New relation: {old} = {new}")?;
                    report.relations.push((old, new));
                }
                None => {
                    let w = render(&word, &names);
                    writeln!(sink, "New CA at {w}.")?;
                    report.words.push(w);
                    by_print.entry(fp.clone()).or_default().push(retained.len());
                    next.push(retained.len());
                    retained.push((word, map, fp));
                }
            }
        }
        report.frontier_sizes.push(next.len());
        report.total = retained.len();
        writeln!(sink, "Frontier size {} at depth {depth}; total number of CA {}.", next.len(), retained.len())?;
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    Ok(report)
}
