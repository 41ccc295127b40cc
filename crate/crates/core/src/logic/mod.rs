//! Boolean circuits over node-symbol indicators, CNF conversion and the SAT front end.

mod circuit;
mod ground;

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;
use varisat::ExtendFormula;

pub use circuit::{at_most_one, Circuit, CircuitBuilder, Gate, GateId, VarId};
pub use ground::{ground, indicator, GroundError, GroundMode};

use crate::topology::{NodeRef, Vector};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlphabetError {
    #[error("the alphabet is empty")]
    Empty,
    #[error("symbol `{0}` listed twice")]
    Duplicate(String),
}

/// An ordered finite alphabet; index 0 is the symbol encoded by all-false indicators.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new(symbols: Vec<String>) -> Result<Self, AlphabetError> {
        if symbols.is_empty() {
            return Err(AlphabetError::Empty);
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(AlphabetError::Duplicate(s.clone()));
            }
        }
        Ok(Alphabet { symbols })
    }

    pub fn binary() -> Self {
        Alphabet { symbols: vec!["0".into(), "1".into()] }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index(&self, s: &str) -> Option<usize> {
        self.symbols.iter().position(|x| x == s)
    }

    pub fn name(&self, i: usize) -> &str {
        &self.symbols[i]
    }

    /// The indicator variables of one node, `symbol` ranging over 1..m.
    pub fn node_vars(&self, n: &NodeRef) -> Vec<VarId> {
        (1..self.len()).map(|s| VarId::node_symbol(n.clone(), s)).collect()
    }
}

/// Clauses over dense positive variable indices, with the map back to circuit variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cnf {
    pub clauses: Vec<Vec<i32>>,
    var_map: Vec<VarId>,
    index: HashMap<VarId, i32>,
}

impl Cnf {
    pub fn num_vars(&self) -> usize {
        self.var_map.len()
    }

    /// Index of `v`, allocating it if new.
    pub fn var(&mut self, v: &VarId) -> i32 {
        if let Some(&i) = self.index.get(v) {
            return i;
        }
        self.var_map.push(v.clone());
        let i = self.var_map.len() as i32;
        self.index.insert(v.clone(), i);
        i
    }

    pub fn lookup(&self, v: &VarId) -> Option<i32> {
        self.index.get(v).copied()
    }

    pub fn var_id(&self, index: i32) -> &VarId {
        &self.var_map[index.unsigned_abs() as usize - 1]
    }

    fn fresh(&mut self) -> i32 {
        let v = VarId::Tseitin(self.var_map.len() as u32);
        self.var(&v)
    }

    /// Adds the definitional clauses of `c` and returns the literal of its root.
    pub fn encode(&mut self, c: &Circuit) -> i32 {
        let mut lits: Vec<i32> = Vec::with_capacity(c.size());
        let mut truth = None;
        for g in c.gates() {
            let lit = match g {
                Gate::True | Gate::False => {
                    let t = *truth.get_or_insert_with(|| {
                        let t = self.fresh();
                        self.clauses.push(vec![t]);
                        t
                    });
                    if matches!(g, Gate::True) {
                        t
                    } else {
                        -t
                    }
                }
                Gate::Var(v) => self.var(v),
                Gate::Not(a) => -lits[*a as usize],
                Gate::And(kids) | Gate::Or(kids) => {
                    let is_and = matches!(g, Gate::And(_));
                    let a = self.fresh();
                    let ks: Vec<i32> = kids.iter().map(|k| lits[*k as usize]).collect();
                    // a <-> AND(ks) ; OR is the dual with negated literals
                    let s = if is_and { 1 } else { -1 };
                    let mut big = vec![s * a];
                    for &k in &ks {
                        self.clauses.push(vec![-s * a, s * k]);
                        big.push(-s * k);
                    }
                    self.clauses.push(big);
                    a
                }
            };
            lits.push(lit);
        }
        lits[c.root() as usize]
    }

    /// Asserts `c`, using no clauses for a constant-true circuit and one empty clause for constant-false.
    pub fn assert_circuit(&mut self, c: &Circuit) {
        match c.as_constant() {
            Some(true) => {}
            Some(false) => self.clauses.push(Vec::new()),
            None => {
                let r = self.encode(c);
                self.clauses.push(vec![r]);
            }
        }
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.num_vars(), self.clauses.len());
        for cl in &self.clauses {
            for l in cl {
                let _ = write!(s, "{l} ");
            }
            s.push_str("0\n");
        }
        s
    }
}

/// Definitional translation of a circuit, with its root asserted.
pub fn to_cnf(c: &Circuit) -> Cnf {
    let mut cnf = Cnf::default();
    cnf.assert_circuit(c);
    cnf
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SatError {
    #[error("SAT backend failure: {0}")]
    Backend(String),
}

/// The operations required of a CDCL solver.
pub trait SatBackend {
    fn add_clause(&mut self, clause: &[i32]);
    fn solve(&mut self, assumptions: &[i32]) -> Result<bool, SatError>;
    /// Value of a variable in the last model; unconstrained variables read as false.
    fn value(&self, var: i32) -> bool;
}

#[derive(Default)]
pub struct VarisatBackend {
    solver: varisat::Solver<'static>,
    model: Vec<bool>,
    lits: Vec<varisat::Lit>,
}

impl VarisatBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

impl SatBackend for VarisatBackend {
    fn add_clause(&mut self, clause: &[i32]) {
        self.lits.clear();
        self.lits.extend(clause.iter().map(|&l| varisat::Lit::from_dimacs(l as isize)));
        self.solver.add_clause(&self.lits);
    }

    fn solve(&mut self, assumptions: &[i32]) -> Result<bool, SatError> {
        let a: Vec<varisat::Lit> = assumptions.iter().map(|&l| varisat::Lit::from_dimacs(l as isize)).collect();
        self.solver.assume(&a);
        let sat = self.solver.solve().map_err(|e| SatError::Backend(e.to_string()))?;
        self.model.clear();
        if sat {
            let model = self.solver.model().ok_or_else(|| SatError::Backend("missing model".into()))?;
            for l in model {
                let i = l.index();
                if self.model.len() <= i {
                    self.model.resize(i + 1, false);
                }
                self.model[i] = l.is_positive();
            }
        }
        Ok(sat)
    }

    fn value(&self, var: i32) -> bool {
        self.model.get(var as usize - 1).copied().unwrap_or(false)
    }
}

/// A satisfying assignment, indexed like the CNF it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    values: Vec<bool>,
}

impl Model {
    pub fn lit(&self, lit: i32) -> bool {
        let v = self.values.get(lit.unsigned_abs() as usize - 1).copied().unwrap_or(false);
        if lit > 0 {
            v
        } else {
            !v
        }
    }

    pub fn satisfies(&self, cnf: &Cnf) -> bool {
        cnf.clauses.iter().all(|c| c.iter().any(|&l| self.lit(l)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatOutcome {
    Sat(Model),
    Unsat,
}

/// Solves `cnf` under assumptions `(variable, value)`.
pub fn solve(cnf: &Cnf, assumptions: &[(VarId, bool)]) -> Result<SatOutcome, SatError> {
    let mut cnf = cnf.clone();
    let lits: Vec<i32> = assumptions.iter().map(|(v, b)| if *b { cnf.var(v) } else { -cnf.var(v) }).collect();
    let mut s = VarisatBackend::new();
    for c in &cnf.clauses {
        s.add_clause(c);
    }
    if !s.solve(&lits)? {
        return Ok(SatOutcome::Unsat);
    }
    let values = (1..=cnf.num_vars() as i32).map(|v| s.value(v)).collect();
    let model = Model { values };
    if !model.satisfies(&cnf) || !lits.iter().all(|&l| model.lit(l)) {
        return Err(SatError::Backend("model violates a clause".into()));
    }
    Ok(SatOutcome::Sat(model))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enumeration {
    /// One entry per model, values in projection order.
    pub models: Vec<Vec<bool>>,
    pub truncated: bool,
}

/// All assignments to `projection` that extend to models, found with blocking clauses.
pub fn enumerate_models(cnf: &Cnf, projection: &[VarId], limit: Option<usize>) -> Result<Enumeration, SatError> {
    let mut cnf = cnf.clone();
    let proj: Vec<i32> = projection.iter().map(|v| cnf.var(v)).collect();
    let mut s = VarisatBackend::new();
    for c in &cnf.clauses {
        s.add_clause(c);
    }
    let mut models = Vec::new();
    loop {
        if !s.solve(&[])? {
            return Ok(Enumeration { models, truncated: false });
        }
        if limit.is_some_and(|l| models.len() >= l) {
            return Ok(Enumeration { models, truncated: true });
        }
        let m: Vec<bool> = proj.iter().map(|&v| s.value(v)).collect();
        let block: Vec<i32> = proj.iter().zip(&m).map(|(&v, &b)| if b { -v } else { v }).collect();
        models.push(m);
        if block.is_empty() {
            return Ok(Enumeration { models, truncated: false });
        }
        s.add_clause(&block);
    }
}

/// An incremental solver over node indicators: circuits are added (optionally translated)
/// and one-hot exclusion is asserted automatically for every node that appears.
pub struct SatInstance {
    backend: Box<dyn SatBackend>,
    cnf: Cnf,
    flushed: usize,
    symbols: usize,
    nodes: HashMap<NodeRef, ()>,
}

impl SatInstance {
    pub fn new(alphabet_size: usize) -> Self {
        Self::with_backend(alphabet_size, Box::new(VarisatBackend::new()))
    }

    pub fn with_backend(alphabet_size: usize, backend: Box<dyn SatBackend>) -> Self {
        SatInstance { backend, cnf: Cnf::default(), flushed: 0, symbols: alphabet_size, nodes: HashMap::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.cnf.num_vars()
    }

    pub fn num_clauses(&self) -> usize {
        self.cnf.clauses.len()
    }

    fn touch(&mut self, n: &NodeRef) {
        if self.nodes.insert(n.clone(), ()).is_some() {
            return;
        }
        let vars: Vec<i32> = (1..self.symbols).map(|s| self.cnf.var(&VarId::node_symbol(n.clone(), s))).collect();
        for i in 0..vars.len() {
            for j in i + 1..vars.len() {
                self.cnf.clauses.push(vec![-vars[i], -vars[j]]);
            }
        }
    }

    /// Declares the indicators of `n` (so that models decode a symbol for it).
    pub fn declare_node(&mut self, n: &NodeRef) {
        self.touch(n);
    }

    /// Literal equivalent to `c` translated by `shift`.
    pub fn literal(&mut self, c: &Circuit, shift: &Vector) -> i32 {
        let c = c.translated(shift);
        for n in c.support() {
            self.touch(&n);
        }
        self.cnf.encode(&c)
    }

    /// Literal equivalent to `c` with node references rewritten by `map`.
    pub fn literal_mapped(&mut self, c: &Circuit, map: impl Fn(&NodeRef) -> NodeRef) -> i32 {
        let mut b = CircuitBuilder::new();
        let r = b.import(c, |b, v| match v {
            VarId::NodeSymbol { node, symbol } => b.var(VarId::NodeSymbol { node: map(node), symbol: *symbol }),
            other => b.var(other.clone()),
        });
        let c = b.finish(r);
        self.literal(&c, &Vector::zero(0))
    }

    pub fn assert(&mut self, c: &Circuit, shift: &Vector) {
        match c.as_constant() {
            Some(true) => {}
            Some(false) => self.cnf.clauses.push(Vec::new()),
            None => {
                let l = self.literal(c, shift);
                self.cnf.clauses.push(vec![l]);
            }
        }
    }

    pub fn add_clause(&mut self, clause: Vec<i32>) {
        self.cnf.clauses.push(clause);
    }

    /// Literals forcing node `n` to carry `symbol`.
    pub fn symbol_literals(&mut self, n: &NodeRef, symbol: usize) -> Vec<i32> {
        self.touch(n);
        (1..self.symbols)
            .map(|s| {
                let v = self.cnf.var(&VarId::node_symbol(n.clone(), s));
                if s == symbol {
                    v
                } else {
                    -v
                }
            })
            .collect()
    }

    /// A clause excluding `symbol` at `n`.
    pub fn forbid_symbol(&mut self, n: &NodeRef, symbol: usize) {
        let lits = self.symbol_literals(n, symbol);
        self.cnf.clauses.push(lits.into_iter().map(|l| -l).collect());
    }

    pub fn solve(&mut self, assumptions: &[i32]) -> Result<bool, SatError> {
        while self.flushed < self.cnf.clauses.len() {
            self.backend.add_clause(&self.cnf.clauses[self.flushed]);
            self.flushed += 1;
        }
        self.backend.solve(assumptions)
    }

    pub fn value(&self, lit: i32) -> bool {
        let v = self.backend.value(lit.abs());
        if lit > 0 {
            v
        } else {
            !v
        }
    }

    /// Symbol at `n` in the last model; `None` for nodes never mentioned.
    pub fn symbol_at(&self, n: &NodeRef) -> Option<usize> {
        if !self.nodes.contains_key(n) {
            return None;
        }
        for s in 1..self.symbols {
            if let Some(v) = self.cnf.lookup(&VarId::node_symbol(n.clone(), s)) {
                if self.backend.value(v) {
                    return Some(s);
                }
            }
        }
        Some(0)
    }
}
