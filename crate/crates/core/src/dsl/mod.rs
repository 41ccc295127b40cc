//! The script language: `%`-commands, topology and alphabet declarations, and
//! first-order formulas over nodes, cells and symbols.
//!
//! Formula precedence, tightest first: atoms, `!`, `&`, `|`, `->` (right
//! associative), `<->`. Quantifier and `let` bodies extend as far right as
//! possible.

mod ast;
mod lexer;

use std::fmt;

use num_rational::Ratio;
use thiserror::Error;

pub use ast::*;
pub use lexer::{tokenize, Tok, Token};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    /// Input ended before the construct was complete.
    pub incomplete: bool,
}

impl ParseError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError { line, col, message: message.into(), incomplete: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Binding {
    Node,
    Cell,
    Param,
    Pred(usize),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    // position reported for errors at end of input
    eof: (usize, usize),
    scope: Vec<(String, Binding)>,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn new(toks: &'a [Token], eof: (usize, usize)) -> Self {
        Parser { toks, pos: 0, eof, scope: Vec::new() }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&'a Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn bump(&mut self) -> Option<&'a Tok> {
        let t = self.toks.get(self.pos).map(|t| &t.tok);
        self.pos += 1;
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        match self.toks.get(self.pos) {
            Some(t) => ParseError::new(t.line, t.col, message),
            None => ParseError { line: self.eof.0, col: self.eof.1, message: message.into(), incomplete: true },
        }
    }

    fn found(&self) -> String {
        self.peek().map(|t| t.describe()).unwrap_or_else(|| "end of input".to_string())
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {}, found {}", tok.describe(), self.found())))
        }
    }

    fn word(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                self.pos += 1;
                Ok(w.clone())
            }
            _ => Err(self.error(format!("expected {what}, found {}", self.found()))),
        }
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> PResult<T> {
        let save = self.pos;
        let w = self.word(what)?;
        w.parse().map_err(|_| {
            self.pos = save;
            self.error(format!("expected {what}, found `{w}`"))
        })
    }

    fn tuple(&mut self, what: &str) -> PResult<Vec<String>> {
        match self.peek() {
            Some(Tok::Tuple(items)) => {
                self.pos += 1;
                Ok(items.clone())
            }
            _ => Err(self.error(format!("expected {what}, found {}", self.found()))),
        }
    }

    fn node_lit(&mut self) -> PResult<NodeLit> {
        let save = self.pos;
        let items = self.tuple("a node such as (0,0,a)")?;
        let (node, offset) = items.split_last().expect("tuples are nonempty");
        let offset = offset
            .iter()
            .map(|s| s.parse::<i32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| {
                self.pos = save;
                self.error("malformed node: offsets must be integers")
            })?;
        if offset.is_empty() {
            self.pos = save;
            return Err(self.error("malformed node: expected at least one offset coordinate"));
        }
        Ok(NodeLit { offset, node: node.clone() })
    }

    fn vector(&mut self) -> PResult<Vec<i32>> {
        let save = self.pos;
        let items = self.tuple("a vector such as (0,1)")?;
        items.iter().map(|s| s.parse::<i32>()).collect::<Result<Vec<_>, _>>().map_err(|_| {
            self.pos = save;
            self.error("malformed vector: coordinates must be integers")
        })
    }

    fn skip_semis(&mut self) {
        while self.peek() == Some(&Tok::Semi) {
            self.pos += 1;
        }
    }

    fn lookup(&self, name: &str) -> Option<Binding> {
        self.scope.iter().rev().find(|(n, _)| n == name).map(|(_, b)| *b)
    }

    // ---- formulas ----

    fn formula(&mut self) -> PResult<Formula> {
        self.binary(1)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Formula> {
        let mut lhs = self.unary()?;
        loop {
            let (prec, right_assoc) = match self.peek() {
                Some(Tok::And) => (4, false),
                Some(Tok::Or) => (3, false),
                Some(Tok::Implies) => (2, true),
                Some(Tok::Iff) => (1, false),
                _ => break,
            };
            if prec < min_prec {
                break;
            }
            let op = self.bump().cloned();
            let rhs = self.binary(if right_assoc { prec } else { prec + 1 })?;
            let (a, b) = (Box::new(lhs), Box::new(rhs));
            lhs = match op {
                Some(Tok::And) => Formula::And(a, b),
                Some(Tok::Or) => Formula::Or(a, b),
                Some(Tok::Implies) => Formula::Implies(a, b),
                _ => Formula::Iff(a, b),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Formula> {
        match self.peek() {
            Some(Tok::Not) => {
                self.pos += 1;
                Ok(Formula::Not(Box::new(self.unary()?)))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Some(Tok::Word(w)) => {
                if w == "let" {
                    return self.let_formula();
                }
                match self.lookup(w) {
                    Some(Binding::Pred(arity)) => self.call(arity),
                    None if quantifier_shape(w).is_some() => self.quantified(),
                    _ => self.atom(),
                }
            }
            _ => Err(self.error(format!("expected a formula, found {}", self.found()))),
        }
    }

    fn let_formula(&mut self) -> PResult<Formula> {
        self.pos += 1;
        let name = self.word("a predicate name")?;
        let mut params = Vec::new();
        while let Some(Tok::Word(p)) = self.peek() {
            params.push(p.clone());
            self.pos += 1;
        }
        self.expect(Tok::Define)?;
        let depth = self.scope.len();
        self.scope.extend(params.iter().map(|p| (p.clone(), Binding::Param)));
        let def = self.formula();
        self.scope.truncate(depth);
        let def = def?;
        match self.peek() {
            Some(Tok::Word(w)) if w == "in" => self.pos += 1,
            _ => return Err(self.error(format!("expected `in`, found {}", self.found()))),
        }
        self.scope.push((name.clone(), Binding::Pred(params.len())));
        let body = self.formula();
        self.scope.truncate(depth);
        Ok(Formula::Let { name, params, def: Box::new(def), body: Box::new(body?) })
    }

    fn call(&mut self, arity: usize) -> PResult<Formula> {
        let name = self.word("a predicate")?;
        let mut args = Vec::with_capacity(arity);
        for _ in 0..arity {
            args.push(self.term(Side::Right)?);
        }
        Ok(Formula::Call { name, args })
    }

    fn quantified(&mut self) -> PResult<Formula> {
        let w = self.word("a quantifier")?;
        let (q, cell, var) = quantifier_shape(&w).expect("checked by caller");
        let mut restriction = Vec::new();
        if let Some(Tok::Restriction(raw)) = self.peek() {
            restriction = self.restriction(raw)?;
            self.pos += 1;
        }
        self.scope.push((var.clone(), if cell { Binding::Cell } else { Binding::Node }));
        let body = self.formula();
        self.scope.pop();
        Ok(Formula::Quant { q, cell, var, restriction, body: Box::new(body?) })
    }

    fn restriction(&self, raw: &str) -> PResult<Vec<(String, u32)>> {
        let chars: Vec<char> = raw.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '_') {
                i += 1;
            }
            let name: String = chars[start..i].iter().collect();
            let dstart = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if name.is_empty() || dstart == i {
                return Err(self.error(format!("malformed restriction `[{raw}]`: expected variable-radius pairs")));
            }
            match self.lookup(&name) {
                Some(Binding::Node | Binding::Cell | Binding::Param) => {}
                _ => return Err(self.error(format!("restriction on undeclared variable `{name}`"))),
            }
            let radius: String = chars[dstart..i].iter().collect();
            let radius = radius
                .parse()
                .map_err(|_| self.error(format!("restriction radius `{radius}` is too large")))?;
            out.push((name, radius));
        }
        Ok(out)
    }

    fn atom(&mut self) -> PResult<Formula> {
        let lhs = self.term(Side::Left)?;
        let op = match self.peek() {
            Some(Tok::Eq) => AtomOp::Eq,
            Some(Tok::NotEq) => AtomOp::NotEq,
            Some(Tok::At) => AtomOp::At,
            Some(Tok::NotAt) => AtomOp::NotAt,
            Some(Tok::Adj) => AtomOp::Adj,
            Some(Tok::NotAdj) => AtomOp::NotAdj,
            _ => return Err(self.error(format!("expected a comparison after `{lhs}`, found {}", self.found()))),
        };
        self.pos += 1;
        let save = self.pos;
        let rhs = self.term(Side::Right)?;
        if matches!(op, AtomOp::At | AtomOp::NotAt | AtomOp::Adj | AtomOp::NotAdj) {
            if let Term::Symbol(s) = &rhs {
                self.pos = save;
                return Err(self.error(format!("unbound variable `{s}`")));
            }
        }
        Ok(Formula::Atom { op, lhs, rhs })
    }

    fn term(&mut self, side: Side) -> PResult<Term> {
        let w = match self.peek() {
            Some(Tok::Word(w)) => w.clone(),
            _ => return Err(self.error(format!("expected a variable or symbol, found {}", self.found()))),
        };
        match self.lookup(&w) {
            Some(Binding::Pred(_)) => Err(self.error(format!("predicate `{w}` used as a term"))),
            Some(_) => {
                self.pos += 1;
                let mut path = Vec::new();
                while self.peek() == Some(&Tok::Dot) {
                    self.pos += 1;
                    path.push(self.word("an edge label or node name")?);
                }
                Ok(Term::Var { name: w, path })
            }
            None => {
                let numeric = w.trim_start_matches('-').chars().all(|c| c.is_ascii_digit());
                if self.peek_at(1) == Some(&Tok::Dot) || (side == Side::Left && !numeric) {
                    return Err(self.error(format!("unbound variable `{w}`")));
                }
                self.pos += 1;
                Ok(Term::Symbol(w))
            }
        }
    }

    // ---- commands ----

    fn options(&mut self, allowed: &[&str]) -> PResult<Vec<(String, String)>> {
        let mut out = Vec::new();
        while let (Some(Tok::Word(k)), Some(Tok::Eq)) = (self.peek(), self.peek_at(1)) {
            if !allowed.contains(&k.as_str()) {
                return Err(self.error(format!("unknown option `{k}` (allowed: {})", allowed.join(", "))));
            }
            self.pos += 2;
            let v = self.word("an option value")?;
            out.push((k.clone(), v));
        }
        Ok(out)
    }

    fn option_value<T: std::str::FromStr>(&self, opts: &[(String, String)], key: &str) -> PResult<Option<T>> {
        match opts.iter().find(|(k, _)| k == key) {
            None => Ok(None),
            Some((_, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| self.error(format!("invalid value `{v}` for option `{key}`"))),
        }
    }

    fn finish(&self) -> PResult<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {} (too many arguments?)", self.found())))
        }
    }

    fn command(&mut self, tag: &str) -> PResult<CommandKind> {
        let kind = match tag {
            "topology" => {
                if let (Some(Tok::Word(name)), None) = (self.peek(), self.peek_at(1)) {
                    self.pos += 1;
                    CommandKind::Topology(TopologyDecl::Builtin(name.clone()))
                } else {
                    let mut edges = Vec::new();
                    self.skip_semis();
                    while !self.at_end() {
                        let label = self.word("an edge label")?;
                        let source = self.node_lit()?;
                        let target = self.node_lit()?;
                        edges.push(EdgeDecl { label, source, target });
                        self.skip_semis();
                    }
                    if edges.is_empty() {
                        return Err(self.error("expected a built-in topology name or edge declarations"));
                    }
                    CommandKind::Topology(TopologyDecl::Custom(edges))
                }
            }
            "alphabet" => {
                let mut syms = Vec::new();
                while !self.at_end() {
                    syms.push(self.word("a symbol")?);
                }
                if syms.is_empty() {
                    return Err(self.error("an alphabet needs at least one symbol"));
                }
                CommandKind::Alphabet(syms)
            }
            "weights" => {
                let mut ws = Vec::new();
                while !self.at_end() {
                    let s = self.word("a symbol")?;
                    let save = self.pos;
                    let w = self.word("a weight")?;
                    let r = parse_rational(&w).ok_or_else(|| {
                        self.pos = save;
                        self.error(format!("malformed weight `{w}`"))
                    });
                    ws.push((s, r?));
                }
                CommandKind::Weights(ws)
            }
            "SFT" => {
                let name = self.word("an SFT name")?;
                if let Some(Tok::Tuple(_)) = self.peek() {
                    let mut pats = Vec::new();
                    while !self.at_end() {
                        let mut pat = Vec::new();
                        while let Some(Tok::Tuple(_)) = self.peek() {
                            let n = self.node_lit()?;
                            let s = self.word("a symbol")?;
                            pat.push((n, s));
                        }
                        if pat.is_empty() {
                            return Err(self.error(format!("expected a pattern, found {}", self.found())));
                        }
                        pats.push(pat);
                        if !self.at_end() {
                            self.expect(Tok::Semi)?;
                            self.skip_semis();
                        }
                    }
                    CommandKind::Sft { name, def: SftDef::Patterns(pats) }
                } else {
                    let f = self.formula()?;
                    CommandKind::Sft { name, def: SftDef::Formula(f) }
                }
            }
            "CA" => {
                let name = self.word("a CA name")?;
                let mut rules = Vec::new();
                self.skip_semis();
                while !self.at_end() {
                    let node = self.word("a node name")?;
                    let symbol = self.word("a symbol")?;
                    let formula = self.formula()?;
                    rules.push(CaRule { node, symbol, formula });
                    self.skip_semis();
                }
                if rules.is_empty() {
                    return Err(self.error("expected rules of the form `node symbol formula`"));
                }
                CommandKind::Ca { name, rules }
            }
            "equal" => {
                let left = self.word("an SFT name")?;
                let right = self.word("an SFT name")?;
                let opts = self.options(&["radius", "period"])?;
                CommandKind::Equal {
                    left,
                    right,
                    max_radius: self.option_value(&opts, "radius")?,
                    max_period: self.option_value(&opts, "period")?,
                }
            }
            "equal_CA" => {
                let left = self.word("a CA name")?;
                let right = self.word("a CA name")?;
                CommandKind::EqualCa { left, right }
            }
            "compose_CA" => {
                let name = self.word("a CA name")?;
                let mut parts = Vec::new();
                while !self.at_end() {
                    parts.push(self.word("a CA name")?);
                }
                if parts.is_empty() {
                    return Err(self.error("expected at least one CA to compose"));
                }
                CommandKind::ComposeCa { name, parts }
            }
            "calculate_CA_ball" => {
                let bound = self.number("a depth bound")?;
                let filename = self.word("an output file name")?;
                let mut generators = Vec::new();
                while !self.at_end() {
                    generators.push(self.word("a CA name")?);
                }
                if generators.is_empty() {
                    return Err(self.error("expected at least one generator"));
                }
                CommandKind::CaBall { bound, filename, generators }
            }
            "minimum_density" => {
                let name = self.word("an SFT name")?;
                let mut periods = Vec::new();
                while let Some(Tok::Tuple(_)) = self.peek() {
                    periods.push(self.vector()?);
                }
                let opts = self.options(&["threads"])?;
                CommandKind::MinimumDensity { name, periods, threads: self.option_value(&opts, "threads")? }
            }
            "density_lower_bound" => {
                let name = self.word("an SFT name")?;
                let radius = self.number("a radius")?;
                let mut domain = Vec::new();
                while let Some(Tok::Tuple(_)) = self.peek() {
                    domain.push(self.node_lit()?);
                }
                if domain.is_empty() {
                    return Err(self.error("expected a nonempty domain"));
                }
                let mut vectors = Vec::new();
                if !self.at_end() {
                    self.expect(Tok::Semi)?;
                    while !self.at_end() {
                        vectors.push(self.vector()?);
                    }
                }
                CommandKind::DensityLowerBound { name, radius, domain, vectors }
            }
            "tiler" => {
                let name = self.word("an SFT name")?;
                let opts = self.options(&["port"])?;
                CommandKind::Tiler { name, port: self.option_value(&opts, "port")? }
            }
            other => return Err(ParseError::new(0, 0, format!("unknown command `%{other}`"))),
        };
        self.finish()?;
        Ok(kind)
    }
}

fn quantifier_shape(w: &str) -> Option<(Quantifier, bool, String)> {
    let mut chars = w.chars();
    let q = match chars.next()? {
        'A' => Quantifier::Forall,
        'E' => Quantifier::Exists,
        _ => return None,
    };
    let rest = chars.as_str();
    let (cell, var) = match rest.strip_prefix('C') {
        Some(v) if !v.is_empty() => (true, v),
        _ => (false, rest),
    };
    let first = var.chars().next()?;
    (first.is_ascii_alphabetic() || first == '_').then(|| (q, cell, var.to_string()))
}

/// Parses `3`, `-1`, `2/5` or `0.25` as an exact rational.
pub fn parse_rational(s: &str) -> Option<Ratio<i64>> {
    if let Some((n, d)) = s.split_once('/') {
        let d: i64 = d.parse().ok()?;
        let n: i64 = n.parse().ok()?;
        return (d != 0).then(|| Ratio::new(n, d));
    }
    if let Some((i, frac)) = s.split_once('.') {
        let neg = i.starts_with('-');
        let whole: i64 = i.parse().ok()?;
        let den = 10i64.checked_pow(frac.len() as u32)?;
        let num: i64 = frac.parse().ok()?;
        let mag = Ratio::from_integer(whole.abs()) + Ratio::new(num, den);
        return Some(if neg { -mag } else { mag });
    }
    s.parse().ok().map(Ratio::from_integer)
}

/// Parses a whole script. Each `%`-command runs until the next `%` at the start of a line.
pub fn parse_script(source: &str) -> Result<Script, ParseError> {
    let toks = tokenize(source)?;
    let eof = end_position(source);
    let mut commands = Vec::new();
    let mut i = 0;
    if let Some(t) = toks.first() {
        if !matches!(t.tok, Tok::Command(_)) {
            return Err(ParseError::new(t.line, t.col, format!("expected a %command, found {}", t.tok.describe())));
        }
    }
    while i < toks.len() {
        let Tok::Command(tag) = &toks[i].tok else { unreachable!() };
        let line = toks[i].line;
        let mut j = i + 1;
        while j < toks.len() && !matches!(toks[j].tok, Tok::Command(_)) {
            j += 1;
        }
        let end = toks.get(j).map(|t| (t.line, t.col)).unwrap_or(eof);
        let mut p = Parser::new(&toks[i + 1..j], end);
        let kind = p.command(tag).map_err(|mut e| {
            if e.message.starts_with("unknown command") {
                e.line = toks[i].line;
                e.col = toks[i].col;
            }
            e
        })?;
        commands.push(Command { kind, line });
        i = j;
    }
    Ok(Script { commands })
}

/// Parses a standalone formula with no variables in scope.
pub fn parse_formula(source: &str) -> Result<Formula, ParseError> {
    let toks = tokenize(source)?;
    parse_formula_tokens(&toks, end_position(source))
}

pub fn parse_formula_tokens(toks: &[Token], eof: (usize, usize)) -> Result<Formula, ParseError> {
    let mut p = Parser::new(toks, eof);
    let f = p.formula()?;
    p.finish()?;
    Ok(f)
}

fn end_position(source: &str) -> (usize, usize) {
    let line = source.lines().count().max(1);
    let col = source.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
    (line, col)
}

// ---- pretty printing of commands ----

fn write_node(f: &mut fmt::Formatter<'_>, n: &NodeLit) -> fmt::Result {
    write!(f, "(")?;
    for c in &n.offset {
        write!(f, "{c},")?;
    }
    write!(f, "{})", n.node)
}

fn write_vector(f: &mut fmt::Formatter<'_>, v: &[i32]) -> fmt::Result {
    let parts: Vec<String> = v.iter().map(|c| c.to_string()).collect();
    if parts.len() == 1 {
        write!(f, "({},)", parts[0])
    } else {
        write!(f, "({})", parts.join(","))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "%{}", self.kind.tag())?;
        match &self.kind {
            CommandKind::Topology(TopologyDecl::Builtin(n)) => write!(f, " {n}"),
            CommandKind::Topology(TopologyDecl::Custom(edges)) => {
                for e in edges {
                    write!(f, "\n{} ", e.label)?;
                    write_node(f, &e.source)?;
                    write!(f, " ")?;
                    write_node(f, &e.target)?;
                    write!(f, ";")?;
                }
                Ok(())
            }
            CommandKind::Alphabet(syms) => write!(f, " {}", syms.join(" ")),
            CommandKind::Weights(ws) => {
                for (s, w) in ws {
                    write!(f, " {s} {w}")?;
                }
                Ok(())
            }
            CommandKind::Sft { name, def: SftDef::Formula(phi) } => write!(f, " {name} {phi}"),
            CommandKind::Sft { name, def: SftDef::Patterns(pats) } => {
                write!(f, " {name}")?;
                for (i, p) in pats.iter().enumerate() {
                    write!(f, "{}", if i == 0 { "\n" } else { ";\n" })?;
                    for (j, (n, s)) in p.iter().enumerate() {
                        if j > 0 {
                            write!(f, " ")?;
                        }
                        write_node(f, n)?;
                        write!(f, " {s}")?;
                    }
                }
                Ok(())
            }
            CommandKind::Ca { name, rules } => {
                write!(f, " {name}")?;
                for r in rules {
                    write!(f, "\n{} {} {};", r.node, r.symbol, r.formula)?;
                }
                Ok(())
            }
            CommandKind::Equal { left, right, max_radius, max_period } => {
                write!(f, " {left} {right}")?;
                if let Some(r) = max_radius {
                    write!(f, " radius={r}")?;
                }
                if let Some(p) = max_period {
                    write!(f, " period={p}")?;
                }
                Ok(())
            }
            CommandKind::EqualCa { left, right } => write!(f, " {left} {right}"),
            CommandKind::ComposeCa { name, parts } => write!(f, " {name} {}", parts.join(" ")),
            CommandKind::CaBall { bound, filename, generators } => {
                write!(f, " {bound} {filename} {}", generators.join(" "))
            }
            CommandKind::MinimumDensity { name, periods, threads } => {
                write!(f, " {name}")?;
                for p in periods {
                    write!(f, " ")?;
                    write_vector(f, p)?;
                }
                if let Some(t) = threads {
                    write!(f, " threads={t}")?;
                }
                Ok(())
            }
            CommandKind::DensityLowerBound { name, radius, domain, vectors } => {
                write!(f, " {name} {radius}")?;
                for n in domain {
                    write!(f, " ")?;
                    write_node(f, n)?;
                }
                write!(f, ";")?;
                for v in vectors {
                    write!(f, " ")?;
                    write_vector(f, v)?;
                }
                Ok(())
            }
            CommandKind::Tiler { name, port } => {
                write!(f, " {name}")?;
                if let Some(p) = port {
                    write!(f, " port={p}")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.commands {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> Term {
        Term::var(name)
    }

    fn sym_eq(var: &str, s: &str) -> Formula {
        Formula::Atom { op: AtomOp::Eq, lhs: v(var), rhs: Term::Symbol(s.into()) }
    }

    fn body(f: Formula) -> Formula {
        match f {
            Formula::Quant { body, .. } => *body,
            other => panic!("expected quantifier, got {other:?}"),
        }
    }

    #[test]
    fn precedence_levels() {
        // atoms bind tighter than connectives; & over |; | over ->; -> over <->
        let f = body(parse_formula("Ao o=1 | o=0 & o=1").unwrap());
        assert_eq!(
            f,
            Formula::Or(
                Box::new(sym_eq("o", "1")),
                Box::new(Formula::And(Box::new(sym_eq("o", "0")), Box::new(sym_eq("o", "1"))))
            )
        );
        let f = body(parse_formula("Ao !o=1 & o=0").unwrap());
        assert!(matches!(f, Formula::And(a, _) if matches!(*a, Formula::Not(_))));
        let f = body(parse_formula("Ao o=1 | o=0 -> o=1").unwrap());
        assert!(matches!(f, Formula::Implies(a, _) if matches!(*a, Formula::Or(..))));
        let f = body(parse_formula("Ao o=1 -> o=0 <-> o=1").unwrap());
        assert!(matches!(f, Formula::Iff(a, _) if matches!(*a, Formula::Implies(..))));
        // -> is right associative
        let f = body(parse_formula("Ao o=1 -> o=0 -> o=1").unwrap());
        assert!(matches!(f, Formula::Implies(_, b) if matches!(*b, Formula::Implies(..))));
        // & and | are left associative
        let f = body(parse_formula("Ao o=1 & o=0 & o=1").unwrap());
        assert!(matches!(f, Formula::And(a, _) if matches!(*a, Formula::And(..))));
    }

    #[test]
    fn restricted_quantifiers() {
        let f = parse_formula("Ax Ey[x2] y = 1").unwrap();
        let Formula::Quant { body, .. } = f else { panic!() };
        let Formula::Quant { q, cell, var, restriction, .. } = *body else { panic!() };
        assert_eq!((q, cell, var.as_str()), (Quantifier::Exists, false, "y"));
        assert_eq!(restriction, vec![("x".to_string(), 2)]);
        let f = parse_formula("Ax Ay[x1] Ez[x10y1] z ~ x").unwrap();
        assert!(f.to_string().contains("Ez[x10y1]"));
        let f = parse_formula("ACo ECc[o1] c.0 = 1").unwrap();
        assert!(matches!(f, Formula::Quant { cell: true, .. }));
    }

    #[test]
    fn scoping_errors() {
        let e = parse_formula("Ao x = 1").unwrap_err();
        assert!(e.message.contains("unbound variable `x`"), "{e}");
        let e = parse_formula("Ao Ey[z1] y = 1").unwrap_err();
        assert!(e.message.contains("restriction on undeclared variable `z`"), "{e}");
        let e = parse_formula("Ao o ~ q").unwrap_err();
        assert!(e.message.contains("unbound variable `q`"), "{e}");
        let e = parse_formula("Ao q.rt = 1").unwrap_err();
        assert!(e.message.contains("unbound variable `q`"), "{e}");
        let e = parse_formula("Ao o o").unwrap_err();
        assert!(e.message.contains("expected a comparison"), "{e}");
        assert!(parse_formula("Ao (o = 1").unwrap_err().incomplete);
    }

    #[test]
    fn let_definitions_and_calls() {
        let src = "Ao let func a b := a @ b | (a = 0 & b = 0) in Ep[o1] func o p";
        let f = parse_formula(src).unwrap();
        let Formula::Quant { body, .. } = f else { panic!() };
        let Formula::Let { name, params, body, .. } = *body else { panic!() };
        assert_eq!((name.as_str(), params.len()), ("func", 2));
        let Formula::Quant { body, .. } = *body else { panic!() };
        assert_eq!(*body, Formula::Call { name: "func".into(), args: vec![v("o"), v("p")] });
    }

    #[test]
    fn idcode_formula_shape() {
        let src = "Ao let c u v := v = 1 & (u ~ v | u @ v) in
            (Ed[o1] c o d) &
            (Ap[o2] p !@ o -> Eq[o1p1] (c o q & !c p q) | (c p q & !c o q))";
        let f = parse_formula(src).unwrap();
        let Formula::Quant { body, .. } = f else { panic!() };
        let Formula::Let { body, .. } = *body else { panic!() };
        let Formula::And(a, b) = *body else { panic!() };
        assert!(matches!(*a, Formula::Quant { q: Quantifier::Exists, .. }));
        assert!(matches!(*b, Formula::Quant { q: Quantifier::Forall, .. }));
    }

    #[test]
    fn scripts() {
        let s = parse_script(
            "%topology\nlt (0,0,0) (-1,0,1); lt (0,0,1) (0,0,0); rt (0,0,0) (0,0,1);\n\
             rt (0,0,1) (1,0,0); up (0,0,0) (0,1,1); dn (0,0,1) (0,-1,0)\n\
             %SFT fullshift Ao 0 = 0\n\
             %density_lower_bound idcode 0 (0,0,0) (0,0,1) (-1,0,1) (0,1,1) (0,-1,0) (1,0,0); (0,-1) (0,1) (1,0)\n",
        )
        .unwrap();
        assert_eq!(s.commands.len(), 3);
        let CommandKind::Topology(TopologyDecl::Custom(edges)) = &s.commands[0].kind else { panic!() };
        assert_eq!(edges.len(), 6);
        assert_eq!(edges[0].target, NodeLit { offset: vec![-1, 0], node: "1".into() });
        assert!(matches!(&s.commands[1].kind, CommandKind::Sft { name, .. } if name == "fullshift"));
        let CommandKind::DensityLowerBound { radius, domain, vectors, .. } = &s.commands[2].kind else { panic!() };
        assert_eq!((*radius, domain.len(), vectors.len()), (0, 6, 3));
        assert_eq!(s.commands[2].line, 5);
    }

    #[test]
    fn script_errors() {
        let e = parse_script("%topology hex\n%frobnicate x").unwrap_err();
        assert_eq!((e.line, e.col), (2, 1));
        assert!(e.message.contains("unknown command"));
        let e = parse_script("%minimum_density x (0,a)").unwrap_err();
        assert!(e.message.contains("malformed vector"));
        let e = parse_script("%equal a").unwrap_err();
        assert!(e.incomplete);
        let e = parse_script("%equal a b c").unwrap_err();
        assert!(e.message.contains("too many"));
        assert!(parse_script("Ao o = 1").is_err());
    }

    #[test]
    fn ca_rules_split_between_formulas() {
        let s = parse_script(
            "%topology\nrt (0, top) (1, top); rt (0, bot) (1, bot);\nlt (0, top) (-1, top); lt (0, bot) (-1, bot)\n\
             %CA F\ntop 1 ACo o.top=1\nbot 1 ACo (o.bot=1 | o.top=1) & (o.bot=0 | o.top=0)\n",
        )
        .unwrap();
        let CommandKind::Ca { rules, .. } = &s.commands[1].kind else { panic!() };
        assert_eq!(rules.len(), 2);
        assert_eq!((rules[1].node.as_str(), rules[1].symbol.as_str()), ("bot", "1"));
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("2/5"), Some(Ratio::new(2, 5)));
        assert_eq!(parse_rational("-1"), Some(Ratio::from_integer(-1)));
        assert_eq!(parse_rational("0.25"), Some(Ratio::new(1, 4)));
        assert_eq!(parse_rational("-0.5"), Some(Ratio::new(-1, 2)));
        assert_eq!(parse_rational("x"), None);
    }
}
