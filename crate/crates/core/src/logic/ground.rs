use std::collections::BTreeSet;
use std::rc::Rc;

use thiserror::Error;

use super::circuit::{Circuit, CircuitBuilder, GateId, VarId};
use super::Alphabet;
use crate::dsl::{AtomOp, Formula, Quantifier, Term};
use crate::topology::{NodeRef, Topology, TopologyError, Vector};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroundError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("symbol `{0}` is not in the alphabet")]
    UnknownSymbol(String),
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("predicate `{name}` takes {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("type error: {0}")]
    Type(String),
    #[error("quantifier over `{0}` has no restriction but is nested inside another quantifier")]
    NestedUnrestricted(String),
}

/// How unrestricted (top-level) quantifiers are interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroundMode {
    /// Node quantifiers range over the nodes of the origin cell.
    Sft,
    /// Node quantifiers name the node being written; cell quantifiers name the origin cell.
    CaRule { node: u32 },
}

#[derive(Clone, Debug)]
enum Value {
    Node(NodeRef),
    Cell(Vector),
    Symbol(usize),
}

struct Pred<'f> {
    name: String,
    params: &'f [String],
    body: &'f Formula,
    env: Env<'f>,
}

#[derive(Clone, Default)]
struct Env<'f> {
    vars: Vec<(String, Value)>,
    preds: Vec<Rc<Pred<'f>>>,
    // number of enclosing node/cell quantifiers
    depth: usize,
}

impl<'f> Env<'f> {
    fn lookup(&self, name: &str) -> Option<&Value> {
        self.vars.iter().rev().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    fn pred(&self, name: &str) -> Option<Rc<Pred<'f>>> {
        self.preds.iter().rev().find(|p| p.name == name).cloned()
    }

    fn bind(&self, name: &str, v: Value) -> Env<'f> {
        let mut e = self.clone();
        e.vars.push((name.to_string(), v));
        e
    }
}

struct Grounder<'a> {
    topo: &'a Topology,
    alphabet: &'a Alphabet,
    origin: Vector,
    mode: GroundMode,
    b: CircuitBuilder,
}

/// Expands a formula into a circuit over node-symbol indicators, anchored at `origin`.
pub fn ground(
    formula: &Formula,
    topo: &Topology,
    alphabet: &Alphabet,
    origin: &Vector,
    mode: GroundMode,
) -> Result<Circuit, GroundError> {
    let mut g = Grounder { topo, alphabet, origin: origin.clone(), mode, b: CircuitBuilder::new() };
    let root = g.formula(formula, &Env::default())?;
    Ok(g.b.finish(root))
}

/// Gate for "node `n` carries symbol `s`"; symbol 0 is the all-false assignment.
pub fn indicator(b: &mut CircuitBuilder, alphabet: &Alphabet, n: &NodeRef, s: usize) -> GateId {
    if s == 0 {
        let negs = (1..alphabet.len()).map(|i| {
            let v = b.var(VarId::node_symbol(n.clone(), i));
            b.not(v)
        });
        let negs: Vec<GateId> = negs.collect();
        b.and(negs)
    } else {
        b.var(VarId::node_symbol(n.clone(), s))
    }
}

impl<'a> Grounder<'a> {
    fn formula<'f>(&mut self, f: &'f Formula, env: &Env<'f>) -> Result<GateId, GroundError> {
        Ok(match f {
            Formula::Atom { op, lhs, rhs } => self.atom(*op, lhs, rhs, env)?,
            Formula::Not(a) => {
                let a = self.formula(a, env)?;
                self.b.not(a)
            }
            Formula::And(a, c) => {
                let (a, c) = (self.formula(a, env)?, self.formula(c, env)?);
                self.b.and2(a, c)
            }
            Formula::Or(a, c) => {
                let (a, c) = (self.formula(a, env)?, self.formula(c, env)?);
                self.b.or2(a, c)
            }
            Formula::Implies(a, c) => {
                let (a, c) = (self.formula(a, env)?, self.formula(c, env)?);
                self.b.implies(a, c)
            }
            Formula::Iff(a, c) => {
                let (a, c) = (self.formula(a, env)?, self.formula(c, env)?);
                self.b.iff(a, c)
            }
            Formula::Quant { q, cell, var, restriction, body } => {
                let domain = self.domain(*cell, var, restriction, env)?;
                let mut kids = Vec::with_capacity(domain.len());
                for v in domain {
                    let mut inner = env.bind(var, v);
                    inner.depth += 1;
                    kids.push(self.formula(body, &inner)?);
                }
                match q {
                    Quantifier::Exists => self.b.or(kids),
                    Quantifier::Forall => self.b.and(kids),
                }
            }
            Formula::Let { name, params, def, body } => {
                let pred = Pred { name: name.clone(), params, body: def, env: env.clone() };
                let mut inner = env.clone();
                inner.preds.push(Rc::new(pred));
                self.formula(body, &inner)?
            }
            Formula::Call { name, args } => {
                let pred = env.pred(name).ok_or_else(|| GroundError::UnknownPredicate(name.clone()))?;
                if pred.params.len() != args.len() {
                    return Err(GroundError::Arity {
                        name: name.clone(),
                        expected: pred.params.len(),
                        got: args.len(),
                    });
                }
                let mut inner = pred.env.clone();
                // calls see the caller's quantifier depth for the nesting rule
                inner.depth = env.depth;
                for (p, a) in pred.params.iter().zip(args) {
                    let v = self.term(a, env)?;
                    inner.vars.push((p.clone(), v));
                }
                self.formula(pred.body, &inner)?
            }
        })
    }

    fn domain(
        &self,
        cell: bool,
        var: &str,
        restriction: &[(String, u32)],
        env: &Env,
    ) -> Result<Vec<Value>, GroundError> {
        if restriction.is_empty() {
            if env.depth > 0 {
                return Err(GroundError::NestedUnrestricted(var.to_string()));
            }
            return Ok(match (cell, self.mode) {
                (true, _) => vec![Value::Cell(self.origin.clone())],
                (false, GroundMode::Sft) => {
                    self.topo.cell_nodes(&self.origin).into_iter().map(Value::Node).collect()
                }
                (false, GroundMode::CaRule { node }) => {
                    vec![Value::Node(NodeRef::new(self.origin.clone(), node))]
                }
            });
        }
        let mut nodes: BTreeSet<NodeRef> = BTreeSet::new();
        for (center, radius) in restriction {
            let centers = match env.lookup(center) {
                Some(Value::Node(n)) => vec![n.clone()],
                Some(Value::Cell(c)) => self.topo.cell_nodes(c),
                Some(Value::Symbol(_)) => {
                    return Err(GroundError::Type(format!("`{center}` is a symbol, not a node or cell")))
                }
                None => return Err(GroundError::Unbound(center.clone())),
            };
            nodes.extend(self.topo.ball_around(&centers, *radius));
        }
        Ok(if cell {
            let cells: BTreeSet<Vector> = nodes.into_iter().map(|n| n.offset).collect();
            cells.into_iter().map(Value::Cell).collect()
        } else {
            nodes.into_iter().map(Value::Node).collect()
        })
    }

    fn term(&self, t: &Term, env: &Env) -> Result<Value, GroundError> {
        match t {
            Term::Symbol(s) => match env.lookup(s) {
                // a symbol-looking word may still name a bound parameter
                Some(v) => Ok(v.clone()),
                None => self.symbol(s).map(Value::Symbol),
            },
            Term::Var { name, path } => {
                let mut v = match env.lookup(name) {
                    Some(v) => v.clone(),
                    None if path.is_empty() => return self.symbol(name).map(Value::Symbol),
                    None => return Err(GroundError::Unbound(name.clone())),
                };
                for step in path {
                    v = self.step(v, step)?;
                }
                Ok(v)
            }
        }
    }

    fn symbol(&self, s: &str) -> Result<usize, GroundError> {
        self.alphabet.index(s).ok_or_else(|| GroundError::UnknownSymbol(s.to_string()))
    }

    fn step(&self, v: Value, step: &str) -> Result<Value, GroundError> {
        match v {
            Value::Node(n) => {
                if self.topo.has_edge(n.node, step) {
                    Ok(Value::Node(self.topo.follow_edge(&n, step)?))
                } else if let Some(r) = self.topo.node_index(step) {
                    Ok(Value::Node(NodeRef::new(n.offset, r)))
                } else {
                    Err(TopologyError::NoSuchEdge { node: self.topo.display_node(&n), label: step.to_string() }.into())
                }
            }
            Value::Cell(c) => {
                if let Some(r) = self.topo.node_index(step) {
                    Ok(Value::Node(NodeRef::new(c, r)))
                } else if self.topo.node_count() == 1 {
                    self.step(Value::Node(NodeRef::new(c, 0)), step)
                } else {
                    Err(GroundError::Type(format!("`{step}` does not name a node of a cell")))
                }
            }
            Value::Symbol(_) => Err(GroundError::Type(format!("cannot follow `.{step}` from a symbol"))),
        }
    }

    fn as_node(&self, v: Value, what: &str) -> Result<NodeRef, GroundError> {
        match v {
            Value::Node(n) => Ok(n),
            Value::Cell(c) if self.topo.node_count() == 1 => Ok(NodeRef::new(c, 0)),
            _ => Err(GroundError::Type(format!("{what} needs node operands"))),
        }
    }

    fn atom(&mut self, op: AtomOp, lhs: &Term, rhs: &Term, env: &Env) -> Result<GateId, GroundError> {
        let (l, r) = (self.term(lhs, env)?, self.term(rhs, env)?);
        let positive = match op {
            AtomOp::Eq | AtomOp::NotEq => match (l, r) {
                (Value::Symbol(a), Value::Symbol(c)) => self.b.constant(a == c),
                (Value::Symbol(s), n) | (n, Value::Symbol(s)) => {
                    let n = self.as_node(n, "`=`")?;
                    indicator(&mut self.b, self.alphabet, &n, s)
                }
                (a, c) => {
                    let (a, c) = (self.as_node(a, "`=`")?, self.as_node(c, "`=`")?);
                    if a == c {
                        self.b.constant(true)
                    } else {
                        let mut kids = Vec::with_capacity(self.alphabet.len());
                        for s in 0..self.alphabet.len() {
                            let x = indicator(&mut self.b, self.alphabet, &a, s);
                            let y = indicator(&mut self.b, self.alphabet, &c, s);
                            kids.push(self.b.and2(x, y));
                        }
                        self.b.or(kids)
                    }
                }
            },
            AtomOp::At | AtomOp::NotAt => match (l, r) {
                (Value::Cell(a), Value::Cell(c)) => self.b.constant(a == c),
                (a, c) => {
                    let (a, c) = (self.as_node(a, "`@`")?, self.as_node(c, "`@`")?);
                    self.b.constant(a == c)
                }
            },
            AtomOp::Adj | AtomOp::NotAdj => {
                let (a, c) = (self.as_node(l, "`~`")?, self.as_node(r, "`~`")?);
                self.b.constant(self.topo.adjacent(&a, &c))
            }
        };
        Ok(match op {
            AtomOp::NotEq | AtomOp::NotAt | AtomOp::NotAdj => self.b.not(positive),
            _ => positive,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_formula;
    use crate::logic::circuit::Gate;

    fn binary() -> Alphabet {
        Alphabet::new(vec!["0".into(), "1".into()]).unwrap()
    }

    fn g(src: &str, topo: &str, mode: GroundMode) -> Result<Circuit, GroundError> {
        let t = Topology::builtin(topo).unwrap();
        let f = parse_formula(src).unwrap();
        ground(&f, &t, &binary(), &Vector::zero(t.dimension()), mode)
    }

    #[test]
    fn single_node_symbol_zero() {
        let c = g("Ao o = 0", "line", GroundMode::Sft).unwrap();
        let v = VarId::node_symbol(NodeRef::origin(1, 0), 1);
        assert_eq!(c.vars().into_iter().collect::<Vec<_>>(), vec![v]);
        assert!(matches!(c.gates()[c.root() as usize], Gate::Not(_)));
    }

    #[test]
    fn edge_walk_in_ca_mode() {
        let c = g("ACo o.rt = 1", "line", GroundMode::CaRule { node: 0 }).unwrap();
        let v = VarId::node_symbol(NodeRef::new(Vector::from_slice(&[1]), 0), 1);
        assert_eq!(c.gates()[c.root() as usize], Gate::Var(v));
    }

    #[test]
    fn tautology_and_contradiction_fold() {
        assert_eq!(g("Ao o = 0 | o = 1", "line", GroundMode::Sft).unwrap().as_constant(), Some(true));
        assert_eq!(g("Ao o != o", "square", GroundMode::Sft).unwrap().as_constant(), Some(false));
        assert_eq!(g("Ao Ep[o1] p !@ o & p ~ o", "square", GroundMode::Sft).unwrap().as_constant(), Some(true));
    }

    #[test]
    fn errors() {
        assert!(matches!(g("Ao o = 2", "line", GroundMode::Sft), Err(GroundError::UnknownSymbol(_))));
        assert!(matches!(g("Ao o.up = 1", "line", GroundMode::Sft), Err(GroundError::Topology(_))));
        assert!(matches!(g("Ao Ap p = 1", "line", GroundMode::Sft), Err(GroundError::NestedUnrestricted(_))));
    }

    #[test]
    fn let_predicates_with_symbol_arguments() {
        let c = g("Ao let x a b := o = a & o.rt = b in x 0 1 | x 1 0", "line", GroundMode::Sft).unwrap();
        let at = |w: [usize; 2]| c.eval_symbols(|n| if n.offset.coords()[0] == 0 { w[0] } else { w[1] });
        assert!(at([0, 1]) && at([1, 0]) && !at([0, 0]) && !at([1, 1]));
    }

    #[test]
    fn idcode_support_is_ball_bounded() {
        let src = "Ao let c u v := v = 1 & (u ~ v | u @ v) in \
                   (Ed[o1] c o d) & (Ap[o2] p !@ o -> Eq[o1p1] (c o q & !c p q) | (c p q & !c o q))";
        let t = Topology::builtin("hex").unwrap();
        let c = g(src, "hex", GroundMode::Sft).unwrap();
        let ball = t.ball_around(&t.cell_nodes(&Vector::zero(2)), 3);
        let support = c.support();
        assert!(!support.is_empty());
        assert!(support.iter().all(|n| ball.contains(n)));
    }
}
