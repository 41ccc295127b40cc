//! Lower bounds on minimum density by a discharging argument whose rules are found by a linear
//! program.
//!
//! A rule (P, m, c) moves charge c from every position where the D-pattern P occurs to the
//! position m further. Every locally allowed pattern Q around the origin yields the constraint
//! `α ≤ C_Q(0) + Σ incoming − Σ outgoing`; the maximal α is a lower bound.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::density_upper::WeightMap;
use crate::logic::{SatError, SatInstance};
use crate::sft::{blocking_clause, Pattern, Sft};
use crate::topology::{NodeRef, Vector};

/// Slack subtracted from the optimum so that the reported value is sound despite rounding.
pub const LP_TOLERANCE: f64 = 1e-9;

/// Box on non-objective variables; the simplex backend misreports unboundedness on free ones.
const CHARGE_BOUND: f64 = 1e4;

#[derive(Debug, Error)]
pub enum LowerBoundError {
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error("more than {0} locally allowed patterns")]
    Truncated(usize),
    #[error("empty domain")]
    EmptyDomain,
    #[error("vector {0} has the wrong dimension")]
    Dimension(Vector),
    #[error("pattern domain does not cover the extended domain")]
    Uncovered,
    #[error("the shift has no locally allowed pattern on the extended domain")]
    Empty,
    #[error("linear program: {0}")]
    Numerical(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpConstraint {
    pub terms: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

/// Free real variables, linear constraints, and one variable to maximize.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    names: Vec<String>,
    constraints: Vec<LpConstraint>,
    objective: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal(Vec<f64>),
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        debug_assert!(terms.iter().all(|(v, _)| *v < self.names.len()));
        self.constraints.push(LpConstraint { terms, cmp, rhs });
    }

    pub fn maximize(&mut self, var: usize) {
        self.objective = var;
    }

    pub fn variables(&self) -> &[String] {
        &self.names
    }

    pub fn constraints(&self) -> &[LpConstraint] {
        &self.constraints
    }

    pub fn objective(&self) -> usize {
        self.objective
    }

    /// The program in the CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        let mut s = format!("Maximize\n obj: {}\nSubject To\n", self.names[self.objective]);
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(s, " c{i}:");
            for (v, a) in &c.terms {
                let _ = write!(s, " {} {} {}", if *a < 0.0 { '-' } else { '+' }, a.abs(), self.names[*v]);
            }
            let op = match c.cmp {
                Cmp::Le => "<=",
                Cmp::Eq => "=",
                Cmp::Ge => ">=",
            };
            let _ = writeln!(s, " {op} {}", c.rhs);
        }
        s.push_str("Bounds\n");
        for n in &self.names {
            let _ = writeln!(s, " {n} free");
        }
        s.push_str("End\n");
        s
    }
}

pub trait LpSolver {
    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome, LowerBoundError>;
}

/// Dense simplex from the `microlp` crate.
#[derive(Clone, Copy, Debug, Default)]
pub struct MicroLp;

impl LpSolver for MicroLp {
    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome, LowerBoundError> {
        use microlp::{ComparisonOp, OptimizationDirection, Problem};
        let mut p = Problem::new(OptimizationDirection::Maximize);
        let vars: Vec<_> = (0..lp.names.len())
            .map(|i| p.add_var(if i == lp.objective { 1.0 } else { 0.0 }, if i == lp.objective { (f64::NEG_INFINITY, f64::INFINITY) } else { (-CHARGE_BOUND, CHARGE_BOUND) }))
            .collect();
        for c in &lp.constraints {
            let terms: Vec<_> = c.terms.iter().map(|&(v, a)| (vars[v], a)).collect();
            let op = match c.cmp {
                Cmp::Le => ComparisonOp::Le,
                Cmp::Eq => ComparisonOp::Eq,
                Cmp::Ge => ComparisonOp::Ge,
            };
            p.add_constraint(terms.as_slice(), op, c.rhs);
        }
        match p.solve() {
            Ok(sol) => Ok(LpOutcome::Optimal(vars.iter().map(|v| *sol.var_value(*v)).collect())),
            Err(microlp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
            Err(microlp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
            Err(e) => Err(LowerBoundError::Numerical(e.to_string())),
        }
    }
}

/// Patterns on `domain` that extend to the cells within distance `radius` of it without
/// violating the shift at any of those cells. Each pattern lists symbols in the order of `domain`.
pub fn locally_allowed_patterns(
    x: &Sft,
    domain: &[NodeRef],
    radius: u32,
    cap: usize,
) -> Result<Vec<Vec<u8>>, LowerBoundError> {
    let m = x.alphabet().len();
    let mut inst = SatInstance::new(m);
    domain.iter().for_each(|n| inst.declare_node(n));
    let cells: BTreeSet<Vector> =
        x.topology().ball_around(domain, radius).into_iter().map(|n| n.offset).collect();
    for c in &cells {
        inst.assert(x.circuit(), c);
    }
    let mut out = Vec::new();
    while inst.solve(&[])? {
        let p: Pattern = domain.iter().map(|n| (n.clone(), inst.symbol_at(n).unwrap_or(0))).collect();
        out.push(domain.iter().map(|n| p.get(n).expect("decoded") as u8).collect());
        if out.len() > cap {
            return Err(LowerBoundError::Truncated(cap));
        }
        let clause = blocking_clause(&mut inst, &p);
        inst.add_clause(clause);
    }
    out.sort();
    Ok(out)
}

/// The data of a discharging argument: rule domain, transfer vectors and pattern sets.
#[derive(Clone, Debug)]
pub struct ChargeContext {
    pub domain: Vec<NodeRef>,
    pub vectors: Vec<Vector>,
    /// Patterns over `domain` that may carry a rule.
    pub rule_patterns: Vec<Vec<u8>>,
    /// The extended domain: `domain` moved by −m for m in `vectors` and 0, plus the origin cell.
    pub extended: Vec<NodeRef>,
    /// Patterns over `extended` that may occur.
    pub patterns: Vec<Vec<u8>>,
}

/// `domain` moved by every −m, with the origin cell included.
pub fn extended_domain(domain: &[NodeRef], vectors: &[Vector], origin_cell: &[NodeRef]) -> Vec<NodeRef> {
    let mut out: BTreeSet<NodeRef> = domain.iter().cloned().collect();
    out.extend(origin_cell.iter().cloned());
    for m in vectors {
        let neg = -m;
        out.extend(domain.iter().map(|n| n.shifted(&neg)));
    }
    out.into_iter().collect()
}

impl ChargeContext {
    pub fn build(x: &Sft, domain: &[NodeRef], vectors: &[Vector], radius: u32, cap: usize) -> Result<Self, LowerBoundError> {
        if domain.is_empty() {
            return Err(LowerBoundError::EmptyDomain);
        }
        let d = x.topology().dimension();
        if let Some(v) = vectors.iter().find(|v| v.dim() != d) {
            return Err(LowerBoundError::Dimension(v.clone()));
        }
        let mut domain: Vec<NodeRef> = domain.to_vec();
        domain.sort();
        domain.dedup();
        let extended = extended_domain(&domain, vectors, &x.topology().cell_nodes(&Vector::zero(d)));
        let rule_patterns = locally_allowed_patterns(x, &domain, radius, cap)?;
        let patterns = locally_allowed_patterns(x, &extended, radius, cap)?;
        Ok(ChargeContext { domain, vectors: vectors.to_vec(), rule_patterns, extended, patterns })
    }
}

/// The linear program, together with the index of α and of each c(P, m).
pub struct DischargingLp {
    pub lp: LinearProgram,
    pub alpha: usize,
    /// `charges[p][k]`: the variable c(rule_patterns[p], vectors[k]).
    pub charges: Vec<Vec<usize>>,
}

struct Lookup {
    positions: Vec<usize>,
}

impl Lookup {
    fn new(extended: &[NodeRef], domain: &[NodeRef], shift: &Vector) -> Result<Self, LowerBoundError> {
        let index: HashMap<&NodeRef, usize> = extended.iter().enumerate().map(|(i, n)| (n, i)).collect();
        let positions = domain
            .iter()
            .map(|n| index.get(&n.shifted(shift)).copied().ok_or(LowerBoundError::Uncovered))
            .collect::<Result<_, _>>()?;
        Ok(Lookup { positions })
    }

    fn restrict(&self, q: &[u8]) -> Vec<u8> {
        self.positions.iter().map(|&i| q[i]).collect()
    }
}

pub fn build_discharging_lp(ctx: &ChargeContext, w: &WeightMap, nodes_per_cell: usize) -> Result<DischargingLp, LowerBoundError> {
    let d = ctx.domain[0].offset.dim();
    let mut lp = LinearProgram::new();
    let alpha = lp.add_variable("alpha");
    lp.maximize(alpha);
    let mut charges = Vec::with_capacity(ctx.rule_patterns.len());
    for (p, _) in ctx.rule_patterns.iter().enumerate() {
        charges.push((0..ctx.vectors.len()).map(|k| lp.add_variable(format!("c_{p}_{k}"))).collect::<Vec<_>>());
    }
    let rule_index: HashMap<&[u8], usize> =
        ctx.rule_patterns.iter().enumerate().map(|(i, p)| (p.as_slice(), i)).collect();
    let here = Lookup::new(&ctx.extended, &ctx.domain, &Vector::zero(d))?;
    let sources: Vec<Lookup> =
        ctx.vectors.iter().map(|m| Lookup::new(&ctx.extended, &ctx.domain, &-m)).collect::<Result<_, _>>()?;
    let origin: Vec<usize> = {
        let cell = Lookup::new(
            &ctx.extended,
            &(0..nodes_per_cell as u32).map(|r| NodeRef::origin(d, r)).collect::<Vec<_>>(),
            &Vector::zero(d),
        )?;
        cell.positions
    };

    let mut seen: HashMap<(Vec<(usize, i64)>, u64), ()> = HashMap::new();
    for q in &ctx.patterns {
        let charge: f64 = origin.iter().map(|&i| w.get(q[i] as usize)).map(ratio_f64).sum::<f64>() / nodes_per_cell as f64;
        // α − Σ incoming + Σ outgoing ≤ C_Q(0)
        let mut coeff: HashMap<usize, i64> = HashMap::from([(alpha, 1)]);
        for (k, src) in sources.iter().enumerate() {
            if let Some(&p) = rule_index.get(src.restrict(q).as_slice()) {
                *coeff.entry(charges[p][k]).or_default() -= 1;
            }
        }
        if let Some(&p) = rule_index.get(here.restrict(q).as_slice()) {
            for k in 0..ctx.vectors.len() {
                *coeff.entry(charges[p][k]).or_default() += 1;
            }
        }
        let mut terms: Vec<(usize, i64)> = coeff.into_iter().filter(|(_, a)| *a != 0).collect();
        terms.sort_unstable();
        if seen.insert((terms.clone(), charge.to_bits()), ()).is_none() {
            lp.add_constraint(terms.into_iter().map(|(v, a)| (v, a as f64)).collect(), Cmp::Le, charge);
        }
    }
    Ok(DischargingLp { lp, alpha, charges })
}

fn ratio_f64(r: num_rational::Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerBound {
    pub bound: f64,
    pub rule_patterns: usize,
    pub patterns: usize,
    pub constraints: usize,
}

/// Sound lower bound on the minimum density of `x` from discharging rules over `domain` along
/// `vectors`. The optimal charges are re-checked against every constraint and the minimum slack
/// is lowered by [`LP_TOLERANCE`].
pub fn density_lower_bound(
    x: &Sft,
    w: &WeightMap,
    domain: &[NodeRef],
    vectors: &[Vector],
    radius: u32,
    solver: &dyn LpSolver,
) -> Result<LowerBound, LowerBoundError> {
    let ctx = ChargeContext::build(x, domain, vectors, radius, 10_000_000)?;
    if ctx.patterns.is_empty() {
        return Err(LowerBoundError::Empty);
    }
    let dlp = build_discharging_lp(&ctx, w, x.topology().node_count())?;
    let values = match solver.solve(&dlp.lp)? {
        LpOutcome::Optimal(v) => v,
        LpOutcome::Infeasible => return Err(LowerBoundError::Numerical("infeasible".into())),
        LpOutcome::Unbounded => return Err(LowerBoundError::Numerical("unbounded".into())),
    };
    // α is at most the right-hand side minus the charge terms of every constraint
    let bound = dlp
        .lp
        .constraints()
        .iter()
        .map(|c| {
            c.rhs - c.terms.iter().filter(|(v, _)| *v != dlp.alpha).map(|(v, a)| a * values[*v]).sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
        - LP_TOLERANCE;
    Ok(LowerBound {
        bound,
        rule_patterns: ctx.rule_patterns.len(),
        patterns: ctx.patterns.len(),
        constraints: dlp.lp.constraints().len(),
    })
}
