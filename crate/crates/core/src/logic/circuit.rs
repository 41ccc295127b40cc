use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::topology::{NodeRef, Vector};

/// A Boolean variable: the indicator "node carries symbol i" (i ≥ 1), or an auxiliary.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarId {
    NodeSymbol { node: NodeRef, symbol: u16 },
    Aux(u32),
    /// Definitional variable introduced by CNF translation; never appears in circuits.
    Tseitin(u32),
}

impl VarId {
    pub fn node_symbol(node: NodeRef, symbol: usize) -> VarId {
        VarId::NodeSymbol { node, symbol: symbol as u16 }
    }

    pub fn node(&self) -> Option<&NodeRef> {
        match self {
            VarId::NodeSymbol { node, .. } => Some(node),
            VarId::Aux(_) | VarId::Tseitin(_) => None,
        }
    }
}

impl fmt::Debug for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarId::NodeSymbol { node, symbol } => write!(f, "v[{node:?}:{symbol}]"),
            VarId::Aux(i) => write!(f, "aux{i}"),
            VarId::Tseitin(i) => write!(f, "t{i}"),
        }
    }
}

pub type GateId = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    True,
    False,
    Var(VarId),
    Not(GateId),
    And(Vec<GateId>),
    Or(Vec<GateId>),
}

/// An immutable Boolean DAG; gates are stored children-first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circuit {
    gates: Vec<Gate>,
    root: GateId,
}

const TRUE: GateId = 0;
const FALSE: GateId = 1;

/// Hash-consing circuit constructor with light constant propagation.
#[derive(Clone, Debug)]
pub struct CircuitBuilder {
    gates: Vec<Gate>,
    table: HashMap<Gate, GateId>,
}

impl Default for CircuitBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl CircuitBuilder {
    pub fn new() -> Self {
        let mut b = CircuitBuilder { gates: Vec::new(), table: HashMap::new() };
        b.intern(Gate::True);
        b.intern(Gate::False);
        b
    }

    fn intern(&mut self, g: Gate) -> GateId {
        if let Some(&id) = self.table.get(&g) {
            return id;
        }
        let id = self.gates.len() as GateId;
        self.gates.push(g.clone());
        self.table.insert(g, id);
        id
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.len() <= 2
    }

    pub fn gate(&self, id: GateId) -> &Gate {
        &self.gates[id as usize]
    }

    pub fn constant(&self, value: bool) -> GateId {
        if value {
            TRUE
        } else {
            FALSE
        }
    }

    pub fn var(&mut self, v: VarId) -> GateId {
        self.intern(Gate::Var(v))
    }

    pub fn not(&mut self, a: GateId) -> GateId {
        match &self.gates[a as usize] {
            Gate::True => FALSE,
            Gate::False => TRUE,
            Gate::Not(inner) => *inner,
            _ => self.intern(Gate::Not(a)),
        }
    }

    fn nary(&mut self, children: Vec<GateId>, is_and: bool) -> GateId {
        let (unit, absorbing) = if is_and { (TRUE, FALSE) } else { (FALSE, TRUE) };
        let mut kids: Vec<GateId> = Vec::with_capacity(children.len());
        for c in children {
            if c == absorbing {
                return absorbing;
            }
            if c == unit {
                continue;
            }
            kids.push(c);
        }
        kids.sort_unstable();
        kids.dedup();
        for &k in &kids {
            if let Gate::Not(inner) = self.gates[k as usize] {
                if kids.binary_search(&inner).is_ok() {
                    return absorbing;
                }
            }
        }
        match kids.len() {
            0 => unit,
            1 => kids[0],
            _ => self.intern(if is_and { Gate::And(kids) } else { Gate::Or(kids) }),
        }
    }

    pub fn and(&mut self, children: Vec<GateId>) -> GateId {
        self.nary(children, true)
    }

    pub fn or(&mut self, children: Vec<GateId>) -> GateId {
        self.nary(children, false)
    }

    pub fn and2(&mut self, a: GateId, b: GateId) -> GateId {
        self.and(vec![a, b])
    }

    pub fn or2(&mut self, a: GateId, b: GateId) -> GateId {
        self.or(vec![a, b])
    }

    pub fn implies(&mut self, a: GateId, b: GateId) -> GateId {
        let na = self.not(a);
        self.or2(na, b)
    }

    pub fn iff(&mut self, a: GateId, b: GateId) -> GateId {
        let x = self.xor(a, b);
        self.not(x)
    }

    pub fn xor(&mut self, a: GateId, b: GateId) -> GateId {
        let (na, nb) = (self.not(a), self.not(b));
        let l = self.and2(a, nb);
        let r = self.and2(na, b);
        self.or2(l, r)
    }

    /// Copies `c` into this builder, replacing each variable by the gate `subst` returns.
    pub fn import(&mut self, c: &Circuit, mut subst: impl FnMut(&mut Self, &VarId) -> GateId) -> GateId {
        let mut map: Vec<GateId> = Vec::with_capacity(c.gates.len());
        for g in &c.gates {
            let id = match g {
                Gate::True => TRUE,
                Gate::False => FALSE,
                Gate::Var(v) => subst(self, v),
                Gate::Not(a) => self.not(map[*a as usize]),
                Gate::And(cs) => {
                    let kids = cs.iter().map(|k| map[*k as usize]).collect();
                    self.and(kids)
                }
                Gate::Or(cs) => {
                    let kids = cs.iter().map(|k| map[*k as usize]).collect();
                    self.or(kids)
                }
            };
            map.push(id);
        }
        map[c.root as usize]
    }

    /// Extracts the sub-DAG reachable from `root` as a standalone circuit.
    pub fn finish(&self, root: GateId) -> Circuit {
        let mut reach = vec![false; self.gates.len()];
        reach[root as usize] = true;
        for i in (0..=root as usize).rev() {
            if !reach[i] {
                continue;
            }
            match &self.gates[i] {
                Gate::Not(a) => reach[*a as usize] = true,
                Gate::And(cs) | Gate::Or(cs) => cs.iter().for_each(|c| reach[*c as usize] = true),
                _ => {}
            }
        }
        let mut renumber = vec![u32::MAX; self.gates.len()];
        let mut gates = Vec::new();
        for (i, g) in self.gates.iter().enumerate() {
            if !reach[i] {
                continue;
            }
            let g = match g {
                Gate::Not(a) => Gate::Not(renumber[*a as usize]),
                Gate::And(cs) => Gate::And(cs.iter().map(|c| renumber[*c as usize]).collect()),
                Gate::Or(cs) => Gate::Or(cs.iter().map(|c| renumber[*c as usize]).collect()),
                other => other.clone(),
            };
            renumber[i] = gates.len() as GateId;
            gates.push(g);
        }
        Circuit { root: renumber[root as usize], gates }
    }
}

impl Circuit {
    pub fn constant(value: bool) -> Circuit {
        Circuit { gates: vec![if value { Gate::True } else { Gate::False }], root: 0 }
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn root(&self) -> GateId {
        self.root
    }

    pub fn size(&self) -> usize {
        self.gates.len()
    }

    pub fn as_constant(&self) -> Option<bool> {
        match self.gates[self.root as usize] {
            Gate::True => Some(true),
            Gate::False => Some(false),
            _ => None,
        }
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        self.gates
            .iter()
            .filter_map(|g| match g {
                Gate::Var(v) => Some(v.clone()),
                _ => None,
            })
            .collect()
    }

    /// Nodes whose indicators the circuit reads.
    pub fn support(&self) -> BTreeSet<NodeRef> {
        self.gates
            .iter()
            .filter_map(|g| match g {
                Gate::Var(VarId::NodeSymbol { node, .. }) => Some(node.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn eval(&self, mut value: impl FnMut(&VarId) -> bool) -> bool {
        let mut vals: Vec<bool> = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let v = match g {
                Gate::True => true,
                Gate::False => false,
                Gate::Var(v) => value(v),
                Gate::Not(a) => !vals[*a as usize],
                Gate::And(cs) => cs.iter().all(|c| vals[*c as usize]),
                Gate::Or(cs) => cs.iter().any(|c| vals[*c as usize]),
            };
            vals.push(v);
        }
        vals[self.root as usize]
    }

    /// Evaluates with node symbols given by `symbol_at` (one-hot decoding).
    pub fn eval_symbols(&self, mut symbol_at: impl FnMut(&NodeRef) -> usize) -> bool {
        self.eval(|v| match v {
            VarId::NodeSymbol { node, symbol } => symbol_at(node) == *symbol as usize,
            VarId::Aux(_) | VarId::Tseitin(_) => false,
        })
    }

    /// The same circuit with every node reference moved by `shift`.
    pub fn translated(&self, shift: &Vector) -> Circuit {
        if shift.is_zero() {
            return self.clone();
        }
        let gates = self
            .gates
            .iter()
            .map(|g| match g {
                Gate::Var(VarId::NodeSymbol { node, symbol }) => {
                    Gate::Var(VarId::NodeSymbol { node: node.shifted(shift), symbol: *symbol })
                }
                other => other.clone(),
            })
            .collect();
        Circuit { gates, root: self.root }
    }

    pub fn negated(&self) -> Circuit {
        let mut b = CircuitBuilder::new();
        let r = b.import(self, |b, v| b.var(v.clone()));
        let n = b.not(r);
        b.finish(n)
    }
}

/// Pairwise exclusion: at most one of `vars` is true.
pub fn at_most_one(vars: &[VarId]) -> Circuit {
    let mut b = CircuitBuilder::new();
    let gates: Vec<GateId> = vars.iter().map(|v| b.var(v.clone())).collect();
    let mut clauses = Vec::new();
    for i in 0..gates.len() {
        for j in i + 1..gates.len() {
            let (ni, nj) = (b.not(gates[i]), b.not(gates[j]));
            clauses.push(b.or2(ni, nj));
        }
    }
    let root = b.and(clauses);
    b.finish(root)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32) -> VarId {
        VarId::Aux(i)
    }

    #[test]
    fn at_most_one_shapes() {
        assert_eq!(at_most_one(&[]).as_constant(), Some(true));
        assert_eq!(at_most_one(&[v(1)]).as_constant(), Some(true));
        let c = at_most_one(&[v(1), v(2)]);
        // a single clause collapses to the OR gate itself
        assert!(matches!(c.gates()[c.root() as usize], Gate::Or(ref k) if k.len() == 2));
        let c = at_most_one(&[v(1), v(2), v(3)]);
        assert!(matches!(c.gates()[c.root() as usize], Gate::And(ref k) if k.len() == 3));
        for bits in 0u32..8 {
            let want = bits.count_ones() <= 1;
            assert_eq!(c.eval(|x| matches!(x, VarId::Aux(i) if bits >> (i - 1) & 1 == 1)), want);
        }
    }

    #[test]
    fn hash_consing_and_simplification() {
        let mut b = CircuitBuilder::new();
        let x = b.var(v(0));
        let y = b.var(v(1));
        assert_eq!(b.and2(x, y), b.and2(y, x));
        let nx = b.not(x);
        assert_eq!(b.not(nx), x);
        assert_eq!(b.and2(x, nx), b.constant(false));
        assert_eq!(b.or2(x, nx), b.constant(true));
        let t = b.constant(true);
        assert_eq!(b.and2(x, t), x);
        let before = b.len();
        let _ = b.and2(y, x);
        assert_eq!(b.len(), before);
    }

    #[test]
    fn finish_keeps_only_reachable_gates() {
        let mut b = CircuitBuilder::new();
        let x = b.var(v(0));
        let y = b.var(v(1));
        let _unused = b.or2(x, y);
        let r = b.and2(x, y);
        let c = b.finish(r);
        assert_eq!(c.size(), 3);
        assert!(c.eval(|_| true));
        assert!(!c.eval(|x| *x == v(0)));
    }
}
