//! Shifts of finite type given by a formula anchored at the origin cell, or by forbidden patterns.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::sync::OnceLock;

use thiserror::Error;

use crate::dsl::{Formula, PatternLit};
use crate::lattice::Lattice;
use crate::logic::{
    ground, indicator, Alphabet, Circuit, CircuitBuilder, Cnf, GroundError, GroundMode, SatError, SatInstance,
    enumerate_models,
};
use crate::topology::{NodeRef, Topology, Vector};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SftError {
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error("more than {0} forbidden patterns; raise the cap or shrink the window")]
    Truncated(usize),
    #[error("forbidden patterns must be nonempty")]
    EmptyPattern,
    #[error("symbol `{0}` is not in the alphabet")]
    UnknownSymbol(String),
    #[error("symbol index {0} is out of range")]
    SymbolOutOfRange(usize),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("expected {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("the window does not contain the node {0}")]
    WindowTooSmall(String),
    #[error("the two shifts live on different topologies or alphabets")]
    Mismatch,
}

/// A finite partial configuration: node ↦ symbol index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    cells: BTreeMap<NodeRef, usize>,
}

impl Pattern {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, n: NodeRef, symbol: usize) -> Option<usize> {
        self.cells.insert(n, symbol)
    }

    pub fn remove(&mut self, n: &NodeRef) -> Option<usize> {
        self.cells.remove(n)
    }

    pub fn get(&self, n: &NodeRef) -> Option<usize> {
        self.cells.get(n).copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeRef, usize)> {
        self.cells.iter().map(|(n, s)| (n, *s))
    }

    pub fn domain(&self) -> BTreeSet<NodeRef> {
        self.cells.keys().cloned().collect()
    }

    pub fn translated(&self, v: &Vector) -> Pattern {
        Pattern { cells: self.cells.iter().map(|(n, s)| (n.shifted(v), *s)).collect() }
    }

    /// The translate whose least node lies in the origin cell.
    pub fn normalized(&self) -> Pattern {
        match self.cells.keys().next() {
            Some(first) => self.translated(&-&first.offset),
            None => self.clone(),
        }
    }

    /// Whether `config` agrees with this pattern on all of its domain.
    pub fn occurs_in(&self, config: &Pattern) -> bool {
        self.cells.iter().all(|(n, s)| config.get(n) == Some(*s))
    }

    pub fn from_literal(t: &Topology, a: &Alphabet, lit: &PatternLit) -> Result<Pattern, SftError> {
        let mut p = Pattern::new();
        for (node, sym) in lit {
            if node.offset.len() != t.dimension() {
                return Err(SftError::Dimension { expected: t.dimension(), got: node.offset.len() });
            }
            let r = t.node_index(&node.node).ok_or_else(|| SftError::UnknownNode(node.node.clone()))?;
            let s = a.index(sym).ok_or_else(|| SftError::UnknownSymbol(sym.clone()))?;
            p.insert(NodeRef::new(Vector::from_slice(&node.offset), r), s);
        }
        Ok(p)
    }

    pub fn display(&self, t: &Topology, a: &Alphabet) -> String {
        let mut s = String::new();
        for (i, (n, sym)) in self.cells.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{} {}", t.display_node(n), a.name(*sym));
        }
        s
    }
}

impl FromIterator<(NodeRef, usize)> for Pattern {
    fn from_iter<I: IntoIterator<Item = (NodeRef, usize)>>(iter: I) -> Self {
        Pattern { cells: iter.into_iter().collect() }
    }
}

/// A totally periodic configuration, given by its values on the canonical coset representatives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeriodicPoint {
    pub lattice: Lattice,
    pub pattern: Pattern,
}

impl PeriodicPoint {
    pub fn symbol_at(&self, n: &NodeRef) -> usize {
        let folded = NodeRef::new(self.lattice.reduce(&n.offset), n.node);
        self.pattern.get(&folded).unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Containment {
    Yes { radius: u32 },
    No(PeriodicPoint),
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// A point of the left shift outside the right one.
    LeftNotInRight,
    RightNotInLeft,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Equality {
    Equal,
    Different { direction: Direction, witness: PeriodicPoint },
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budgets {
    pub max_radius: u32,
    pub max_period: u32,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { max_radius: 5, max_period: 8 }
    }
}

#[derive(Debug)]
pub struct Sft {
    topology: Topology,
    alphabet: Alphabet,
    circuit: Circuit,
    forbidden: OnceLock<Vec<Pattern>>,
}

impl Clone for Sft {
    fn clone(&self) -> Self {
        let forbidden = OnceLock::new();
        if let Some(f) = self.forbidden.get() {
            let _ = forbidden.set(f.clone());
        }
        Sft { topology: self.topology.clone(), alphabet: self.alphabet.clone(), circuit: self.circuit.clone(), forbidden }
    }
}

pub const DEFAULT_PATTERN_CAP: usize = 100_000;

impl Sft {
    pub fn from_circuit(topology: Topology, alphabet: Alphabet, circuit: Circuit) -> Sft {
        Sft { topology, alphabet, circuit, forbidden: OnceLock::new() }
    }

    pub fn from_formula(topology: &Topology, alphabet: &Alphabet, formula: &Formula) -> Result<Sft, SftError> {
        let origin = Vector::zero(topology.dimension());
        let circuit = ground(formula, topology, alphabet, &origin, GroundMode::Sft)?;
        Ok(Sft::from_circuit(topology.clone(), alphabet.clone(), circuit))
    }

    pub fn from_patterns(topology: &Topology, alphabet: &Alphabet, forbidden: Vec<Pattern>) -> Result<Sft, SftError> {
        let mut b = CircuitBuilder::new();
        let mut kids = Vec::new();
        for p in &forbidden {
            if p.is_empty() {
                return Err(SftError::EmptyPattern);
            }
            let mut conj = Vec::new();
            for (n, s) in p.iter() {
                if s >= alphabet.len() {
                    return Err(SftError::SymbolOutOfRange(s));
                }
                if n.offset.dim() != topology.dimension() {
                    return Err(SftError::Dimension { expected: topology.dimension(), got: n.offset.dim() });
                }
                if n.node as usize >= topology.node_count() {
                    return Err(SftError::UnknownNode(n.node.to_string()));
                }
                conj.push(indicator(&mut b, alphabet, n, s));
            }
            let m = b.and(conj);
            kids.push(b.not(m));
        }
        let root = b.and(kids);
        let sft = Sft::from_circuit(topology.clone(), alphabet.clone(), b.finish(root));
        let _ = sft.forbidden.set(forbidden);
        Ok(sft)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    fn origin(&self) -> Vector {
        Vector::zero(self.topology.dimension())
    }

    fn decode(&self, inst: &SatInstance, nodes: impl IntoIterator<Item = NodeRef>) -> Pattern {
        nodes.into_iter().map(|n| {
            let s = inst.symbol_at(&n).unwrap_or(0);
            (n, s)
        }).collect()
    }

    /// Every pattern with domain `window` (default: the circuit's support) on which the circuit fails.
    pub fn extract_forbidden(&self, window: Option<&BTreeSet<NodeRef>>, cap: usize) -> Result<Vec<Pattern>, SftError> {
        let support = self.circuit.support();
        let window = window.cloned().unwrap_or_else(|| support.clone());
        if let Some(n) = support.iter().find(|n| !window.contains(n)) {
            return Err(SftError::WindowTooSmall(self.topology.display_node(n)));
        }
        if self.circuit.as_constant() == Some(true) {
            return Ok(Vec::new());
        }
        let mut cnf = Cnf::default();
        cnf.assert_circuit(&self.circuit.negated());
        let mut projection = Vec::new();
        for n in &window {
            let vars = self.alphabet.node_vars(n);
            let idx: Vec<i32> = vars.iter().map(|v| cnf.var(v)).collect();
            for i in 0..idx.len() {
                for j in i + 1..idx.len() {
                    cnf.clauses.push(vec![-idx[i], -idx[j]]);
                }
            }
            projection.extend(vars);
        }
        let e = enumerate_models(&cnf, &projection, Some(cap))?;
        if e.truncated {
            return Err(SftError::Truncated(cap));
        }
        let m = self.alphabet.len() - 1;
        let mut out: Vec<Pattern> = e
            .models
            .iter()
            .map(|bits| {
                window
                    .iter()
                    .enumerate()
                    .map(|(k, n)| {
                        let s = (0..m).find(|&i| bits[k * m + i]).map(|i| i + 1).unwrap_or(0);
                        (n.clone(), s)
                    })
                    .collect()
            })
            .collect();
        out.sort();
        Ok(out)
    }

    /// A set F of inclusion-minimal patterns, up to translation, such that a pattern on the
    /// support violates the circuit exactly when it contains a member of F. Cached.
    pub fn minimal_forbidden(&self, cap: usize) -> Result<&[Pattern], SftError> {
        if let Some(f) = self.forbidden.get() {
            return Ok(f);
        }
        let f = self.compute_minimal_forbidden(cap)?;
        Ok(self.forbidden.get_or_init(|| f))
    }

    fn compute_minimal_forbidden(&self, cap: usize) -> Result<Vec<Pattern>, SftError> {
        let m = self.alphabet.len();
        match self.circuit.as_constant() {
            Some(true) => return Ok(Vec::new()),
            Some(false) => {
                let n = NodeRef::origin(self.topology.dimension(), 0);
                return Ok((0..m).map(|s| [(n.clone(), s)].into_iter().collect()).collect());
            }
            None => {}
        }
        let support: Vec<NodeRef> = self.circuit.support().into_iter().collect();
        let origin = self.origin();
        let mut bad = SatInstance::new(m);
        bad.assert(&self.circuit.negated(), &origin);
        support.iter().for_each(|n| bad.declare_node(n));
        let mut good = SatInstance::new(m);
        good.assert(&self.circuit, &origin);
        support.iter().for_each(|n| good.declare_node(n));

        let mut found: Vec<Pattern> = Vec::new();
        let mut seen: HashSet<Pattern> = HashSet::new();
        while bad.solve(&[])? {
            let mut p = self.decode(&bad, support.iter().cloned());
            for n in &support {
                let s = p.remove(n).expect("node in pattern");
                let lits: Vec<i32> = p.iter().flat_map(|(q, t)| good.symbol_literals(q, t)).collect();
                if good.solve(&lits)? {
                    p.insert(n.clone(), s);
                }
            }
            // block every translate of p that fits in the support
            let support_set: BTreeSet<NodeRef> = support.iter().cloned().collect();
            for v in translates_fitting(&p, &support_set) {
                let clause = blocking_clause(&mut bad, &p.translated(&v));
                bad.add_clause(clause);
            }
            if seen.insert(p.normalized()) {
                found.push(p.normalized());
                if found.len() > cap {
                    return Err(SftError::Truncated(cap));
                }
            }
        }
        found.sort();
        Ok(found)
    }

    /// Translates `v` such that the circuit moved by `v` only reads nodes of `domain`.
    pub fn translates_within(&self, domain: &BTreeSet<NodeRef>) -> Vec<Vector> {
        let support = self.circuit.support();
        let Some(anchor) = support.iter().next() else {
            return Vec::new();
        };
        let mut out = BTreeSet::new();
        for n in domain {
            if n.node != anchor.node {
                continue;
            }
            let v = &n.offset - &anchor.offset;
            if support.iter().all(|s| domain.contains(&s.shifted(&v))) {
                out.insert(v);
            }
        }
        out.into_iter().collect()
    }

    /// Translates inside the domain of `config` at which the circuit evaluates to false.
    pub fn violations(&self, config: &Pattern) -> Vec<Vector> {
        if self.circuit.as_constant() == Some(false) {
            let cells: BTreeSet<Vector> = config.iter().map(|(n, _)| n.offset.clone()).collect();
            return cells.into_iter().collect();
        }
        let domain = config.domain();
        self.translates_within(&domain)
            .into_iter()
            .filter(|v| {
                let c = self.circuit.translated(v);
                !c.eval_symbols(|n| config.get(n).unwrap_or(0))
            })
            .collect()
    }

    /// A totally periodic point of the shift with the given periods, optionally also satisfying
    /// `extra` at the origin.
    pub fn find_periodic(&self, lattice: &Lattice, extra: Option<&Circuit>) -> Result<Option<PeriodicPoint>, SftError> {
        if self.circuit.as_constant() == Some(false) || extra.and_then(Circuit::as_constant) == Some(false) {
            return Ok(None);
        }
        let mut inst = SatInstance::new(self.alphabet.len());
        let reps = lattice.representatives();
        let fold = |n: &NodeRef| NodeRef::new(lattice.reduce(&n.offset), n.node);
        let domain: Vec<NodeRef> = reps.iter().flat_map(|r| self.topology.cell_nodes(r)).collect();
        domain.iter().for_each(|n| inst.declare_node(n));
        if self.circuit.as_constant().is_none() {
            for r in &reps {
                let lit = inst.literal_mapped(&self.circuit, |n| fold(&n.shifted(r)));
                inst.add_clause(vec![lit]);
            }
        }
        if let Some(e) = extra.filter(|e| e.as_constant().is_none()) {
            let lit = inst.literal_mapped(e, fold);
            inst.add_clause(vec![lit]);
        }
        if !inst.solve(&[])? {
            return Ok(None);
        }
        let pattern = self.decode(&inst, domain);
        Ok(Some(PeriodicPoint { lattice: lattice.clone(), pattern }))
    }

    fn check_compatible(&self, other: &Sft) -> Result<(), SftError> {
        if self.topology != other.topology || self.alphabet != other.alphabet {
            return Err(SftError::Mismatch);
        }
        Ok(())
    }

    /// Whether every configuration of `self` avoids violating `other` at the origin,
    /// given that `self` holds on all of [−k,k]^d.
    fn local_containment(&self, other: &Sft, k: u32) -> Result<bool, SftError> {
        let mut inst = SatInstance::new(self.alphabet.len());
        let d = self.topology.dimension();
        let mut box_ = vec![Vec::<i32>::new()];
        for _ in 0..d {
            box_ = box_
                .into_iter()
                .flat_map(|p| {
                    (-(k as i32)..=k as i32).map(move |x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        for c in &box_ {
            inst.assert(&self.circuit, &Vector::from_slice(c));
        }
        inst.assert(&other.circuit.negated(), &self.origin());
        Ok(!inst.solve(&[])?)
    }

    /// Wang-style semi-decision of `self ⊆ other`, alternating a compactness check and a
    /// periodic counterexample search for k = 1, 2, ...
    pub fn contains_in(&self, other: &Sft, budgets: Budgets) -> Result<Containment, SftError> {
        self.check_compatible(other)?;
        let not_other = other.circuit.negated();
        let d = self.topology.dimension();
        for k in 1..=budgets.max_radius.max(budgets.max_period) {
            if k <= budgets.max_radius && self.local_containment(other, k)? {
                return Ok(Containment::Yes { radius: k });
            }
            if k <= budgets.max_period {
                if let Some(p) = self.find_periodic(&Lattice::diagonal(d, k as i32), Some(&not_other))? {
                    return Ok(Containment::No(p));
                }
            }
        }
        Ok(Containment::Unknown)
    }

    pub fn equal(&self, other: &Sft, budgets: Budgets) -> Result<Equality, SftError> {
        let left = self.contains_in(other, budgets)?;
        if let Containment::No(w) = left {
            return Ok(Equality::Different { direction: Direction::LeftNotInRight, witness: w });
        }
        let right = other.contains_in(self, budgets)?;
        Ok(match (left, right) {
            (_, Containment::No(w)) => Equality::Different { direction: Direction::RightNotInLeft, witness: w },
            (Containment::Yes { .. }, Containment::Yes { .. }) => Equality::Equal,
            _ => Equality::Unknown,
        })
    }

    /// Completes `partial` to all of `domain` so that every translate of the circuit inside the
    /// domain holds.
    pub fn deduce(&self, partial: &Pattern, domain: &BTreeSet<NodeRef>) -> Result<Option<Pattern>, SftError> {
        let mut inst = SatInstance::new(self.alphabet.len());
        domain.iter().for_each(|n| inst.declare_node(n));
        if self.circuit.as_constant() == Some(false) && !domain.is_empty() {
            return Ok(None);
        }
        for v in self.translates_within(domain) {
            inst.assert(&self.circuit, &v);
        }
        let mut lits = Vec::new();
        for (n, s) in partial.iter() {
            if s >= self.alphabet.len() {
                return Err(SftError::SymbolOutOfRange(s));
            }
            lits.extend(inst.symbol_literals(n, s));
        }
        if !inst.solve(&lits)? {
            return Ok(None);
        }
        let mut out = self.decode(&inst, domain.iter().cloned());
        for (n, s) in partial.iter() {
            out.insert(n.clone(), s);
        }
        Ok(Some(out))
    }
}

/// Vectors `v` with `p + v` inside `domain`.
fn translates_fitting(p: &Pattern, domain: &BTreeSet<NodeRef>) -> Vec<Vector> {
    let Some((anchor, _)) = p.iter().next() else {
        return Vec::new();
    };
    domain
        .iter()
        .filter(|n| n.node == anchor.node)
        .map(|n| &n.offset - &anchor.offset)
        .filter(|v| p.iter().all(|(q, _)| domain.contains(&q.shifted(v))))
        .collect()
}

/// Clause stating that `p` does not occur (at its given position).
pub(crate) fn blocking_clause(inst: &mut SatInstance, p: &Pattern) -> Vec<i32> {
    let mut clause = Vec::new();
    for (n, s) in p.iter() {
        let lits = inst.symbol_literals(n, s);
        if s == 0 {
            // all indicators false; negation: some indicator true
            clause.extend(lits.into_iter().map(|l| -l));
        } else {
            clause.push(-lits[s - 1]);
        }
    }
    clause
}
