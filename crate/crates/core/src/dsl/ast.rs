use std::fmt;

use num_rational::Ratio;

/// A term: a variable followed by a walk of edge labels / node names, or a literal symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Var { name: String, path: Vec<String> },
    Symbol(String),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var { name: name.to_string(), path: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AtomOp {
    /// `=`: same symbol
    Eq,
    NotEq,
    /// `@`: same node
    At,
    NotAt,
    /// `~`: adjacent nodes
    Adj,
    NotAdj,
}

impl AtomOp {
    fn as_str(self) -> &'static str {
        match self {
            AtomOp::Eq => "=",
            AtomOp::NotEq => "!=",
            AtomOp::At => "@",
            AtomOp::NotAt => "!@",
            AtomOp::Adj => "~",
            AtomOp::NotAdj => "!~",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantifier {
    Exists,
    Forall,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Atom { op: AtomOp, lhs: Term, rhs: Term },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    /// `Ey[x2]`, `ACc[o1]`; an empty restriction quantifies over the origin cell.
    Quant {
        q: Quantifier,
        cell: bool,
        var: String,
        restriction: Vec<(String, u32)>,
        body: Box<Formula>,
    },
    Let {
        name: String,
        params: Vec<String>,
        def: Box<Formula>,
        body: Box<Formula>,
    },
    Call { name: String, args: Vec<Term> },
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Symbol(s) => write!(f, "{s}"),
            Term::Var { name, path } => {
                write!(f, "{name}")?;
                for p in path {
                    write!(f, ".{p}")?;
                }
                Ok(())
            }
        }
    }
}

/// Fully parenthesised rendering; parsing it yields the same tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom { op, lhs, rhs } => write!(f, "{lhs} {} {rhs}", op.as_str()),
            Formula::Not(a) => write!(f, "!({a})"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
            Formula::Iff(a, b) => write!(f, "({a} <-> {b})"),
            Formula::Quant { q, cell, var, restriction, body } => {
                let qc = match q {
                    Quantifier::Exists => "E",
                    Quantifier::Forall => "A",
                };
                write!(f, "({qc}{}{var}", if *cell { "C" } else { "" })?;
                if !restriction.is_empty() {
                    write!(f, "[")?;
                    for (v, r) in restriction {
                        write!(f, "{v}{r}")?;
                    }
                    write!(f, "]")?;
                }
                write!(f, " {body})")
            }
            Formula::Let { name, params, def, body } => {
                write!(f, "(let {name}")?;
                for p in params {
                    write!(f, " {p}")?;
                }
                write!(f, " := {def} in {body})")
            }
            Formula::Call { name, args } => {
                write!(f, "({name}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A node written as a tuple `(x1,...,xd,name)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeLit {
    pub offset: Vec<i32>,
    pub node: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeDecl {
    pub label: String,
    pub source: NodeLit,
    pub target: NodeLit,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TopologyDecl {
    Builtin(String),
    Custom(Vec<EdgeDecl>),
}

/// A forbidden pattern written as `(x,..,node) symbol` pairs.
pub type PatternLit = Vec<(NodeLit, String)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SftDef {
    Formula(Formula),
    Patterns(Vec<PatternLit>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaRule {
    pub node: String,
    pub symbol: String,
    pub formula: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Topology(TopologyDecl),
    Alphabet(Vec<String>),
    Weights(Vec<(String, Ratio<i64>)>),
    Sft { name: String, def: SftDef },
    Ca { name: String, rules: Vec<CaRule> },
    Equal { left: String, right: String, max_radius: Option<u32>, max_period: Option<u32> },
    EqualCa { left: String, right: String },
    ComposeCa { name: String, parts: Vec<String> },
    CaBall { bound: u32, filename: String, generators: Vec<String> },
    MinimumDensity { name: String, periods: Vec<Vec<i32>>, threads: Option<usize> },
    DensityLowerBound { name: String, radius: u32, domain: Vec<NodeLit>, vectors: Vec<Vec<i32>> },
    Tiler { name: String, port: Option<u16> },
}

impl CommandKind {
    pub fn tag(&self) -> &'static str {
        match self {
            CommandKind::Topology(_) => "topology",
            CommandKind::Alphabet(_) => "alphabet",
            CommandKind::Weights(_) => "weights",
            CommandKind::Sft { .. } => "SFT",
            CommandKind::Ca { .. } => "CA",
            CommandKind::Equal { .. } => "equal",
            CommandKind::EqualCa { .. } => "equal_CA",
            CommandKind::ComposeCa { .. } => "compose_CA",
            CommandKind::CaBall { .. } => "calculate_CA_ball",
            CommandKind::MinimumDensity { .. } => "minimum_density",
            CommandKind::DensityLowerBound { .. } => "density_lower_bound",
            CommandKind::Tiler { .. } => "tiler",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Command {
    pub kind: CommandKind,
    pub line: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Script {
    pub commands: Vec<Command>,
}
