use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use shiftlab::blockmap::{ca_ball, BlockMap, BlockMapError, CaEquality};
use shiftlab::density_lower::{density_lower_bound, LowerBoundError, MicroLp};
use shiftlab::density_upper::{minimum_density_upper, DensityError, WeightMap};
use shiftlab::dsl::{
    parse_script, Command, CommandKind, NodeLit, ParseError, SftDef, TopologyDecl,
};
use shiftlab::logic::{Alphabet, AlphabetError};
use shiftlab::sft::{Budgets, Direction, Equality, Pattern, PeriodicPoint, Sft, SftError};
use shiftlab::topology::{EdgeSpec, NodeRef, Topology, TopologyError, Vector};
use shiftlab_tiler::{TilerError, TilerSession};
use thiserror::Error;

type Rational = num_rational::Ratio<i64>;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no topology set (use %topology first)")]
    NoTopology,
    #[error("no SFT named `{0}`")]
    UnknownSft(String),
    #[error("no CA named `{0}`")]
    UnknownCa(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node tuple {0} has the wrong dimension")]
    NodeDimension(String),
    #[error("bad period vectors: {0}")]
    Periods(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Alphabet(#[from] AlphabetError),
    #[error(transparent)]
    Sft(#[from] SftError),
    #[error(transparent)]
    BlockMap(#[from] BlockMapError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    LowerBound(#[from] LowerBoundError),
    #[error(transparent)]
    Tiler(#[from] TilerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("line {line}: {source}")]
    Command { line: usize, source: SessionError },
}

impl RunError {
    /// Process exit status: 2 for parse errors, 1 for failed commands.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Parse(_) => 2,
            RunError::Command { .. } => 1,
        }
    }
}

/// How `%tiler` is handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TilerMode {
    /// Serve until the process is stopped.
    Serve,
    /// Only check that a session can be created.
    Check,
}

/// Named objects and settings shared by the commands of a script or REPL.
pub struct Session {
    topology: Option<Topology>,
    alphabet: Alphabet,
    weights: Vec<(String, Rational)>,
    sfts: BTreeMap<String, Sft>,
    cas: BTreeMap<String, BlockMap>,
    pub threads: usize,
    pub log_dir: PathBuf,
    pub tiler_mode: TilerMode,
    pub default_port: u16,
    pub show_timing: bool,
}

impl Default for Session {
    fn default() -> Self {
        Session {
            topology: None,
            alphabet: Alphabet::binary(),
            weights: Vec::new(),
            sfts: BTreeMap::new(),
            cas: BTreeMap::new(),
            threads: 1,
            log_dir: PathBuf::from("."),
            tiler_mode: TilerMode::Check,
            default_port: 8765,
            show_timing: true,
        }
    }
}

fn seconds(t: Instant) -> String {
    format!("{:.2} s", t.elapsed().as_secs_f64())
}

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn topology(&self) -> Option<&Topology> {
        self.topology.as_ref()
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn sft(&self, name: &str) -> Result<&Sft, SessionError> {
        self.sfts.get(name).ok_or_else(|| SessionError::UnknownSft(name.to_string()))
    }

    pub fn ca(&self, name: &str) -> Result<&BlockMap, SessionError> {
        self.cas.get(name).ok_or_else(|| SessionError::UnknownCa(name.to_string()))
    }

    pub fn sft_names(&self) -> Vec<&str> {
        self.sfts.keys().map(String::as_str).collect()
    }

    pub fn ca_names(&self) -> Vec<&str> {
        self.cas.keys().map(String::as_str).collect()
    }

    fn need_topology(&self) -> Result<&Topology, SessionError> {
        self.topology.as_ref().ok_or(SessionError::NoTopology)
    }

    /// Parses and runs `source`, stopping at the first error.
    pub fn run_source(&mut self, source: &str, out: &mut dyn Write) -> Result<(), RunError> {
        let script = parse_script(source)?;
        for cmd in &script.commands {
            self.execute(cmd, out).map_err(|source| RunError::Command { line: cmd.line, source })?;
        }
        Ok(())
    }

    fn timing(&self, t: Instant) -> String {
        if self.show_timing {
            format!(" ({})", seconds(t))
        } else {
            String::new()
        }
    }

    pub fn execute(&mut self, cmd: &Command, out: &mut dyn Write) -> Result<(), SessionError> {
        let start = Instant::now();
        match &cmd.kind {
            CommandKind::Topology(decl) => {
                self.topology = Some(build_topology(decl)?);
            }
            CommandKind::Alphabet(symbols) => {
                self.alphabet = Alphabet::new(symbols.clone())?;
                self.weights.clear();
            }
            CommandKind::Weights(w) => {
                WeightMap::from_pairs(&self.alphabet, w)?;
                self.weights = w.clone();
            }
            CommandKind::Sft { name, def } => {
                let t = self.need_topology()?;
                let sft = match def {
                    SftDef::Formula(f) => Sft::from_formula(t, &self.alphabet, f)?,
                    SftDef::Patterns(ps) => {
                        let pats = ps
                            .iter()
                            .map(|p| Pattern::from_literal(t, &self.alphabet, p))
                            .collect::<Result<Vec<_>, _>>()?;
                        Sft::from_patterns(t, &self.alphabet, pats)?
                    }
                };
                if self.sfts.insert(name.clone(), sft).is_some() {
                    writeln!(out, "warning: SFT {name} redefined")?;
                }
            }
            CommandKind::Ca { name, rules } => {
                let t = self.need_topology()?;
                let ca = BlockMap::define(t, &self.alphabet, rules)?;
                if self.cas.insert(name.clone(), ca).is_some() {
                    writeln!(out, "warning: CA {name} redefined")?;
                }
            }
            CommandKind::Equal { left, right, max_radius, max_period } => {
                let mut budgets = Budgets::default();
                if let Some(r) = max_radius {
                    budgets.max_radius = *r;
                }
                if let Some(p) = max_period {
                    budgets.max_period = *p;
                }
                let (l, r) = (self.sft(left)?, self.sft(right)?);
                let line = match l.equal(r, budgets)? {
                    Equality::Equal => "EQUAL".to_string(),
                    Equality::Unknown => "UNKNOWN".to_string(),
                    Equality::Different { direction, witness } => {
                        let (a, b) = match direction {
                            Direction::LeftNotInRight => (left, right),
                            Direction::RightNotInLeft => (right, left),
                        };
                        format!("DIFFERENT: {a} is not contained in {b}; witness {}", describe_point(l, &witness))
                    }
                };
                writeln!(out, "{line}{}", self.timing(start))?;
            }
            CommandKind::EqualCa { left, right } => {
                let (l, r) = (self.ca(left)?, self.ca(right)?);
                let line = match l.equal(r)? {
                    CaEquality::Equal => "EQUAL".to_string(),
                    CaEquality::Different { node, witness } => format!(
                        "DIFFERENT at node {}; input {}",
                        l.topology().node_name(node),
                        witness.display(l.topology(), l.alphabet())
                    ),
                };
                writeln!(out, "{line}{}", self.timing(start))?;
            }
            CommandKind::ComposeCa { name, parts } => {
                let maps = parts.iter().map(|p| self.ca(p)).collect::<Result<Vec<_>, _>>()?;
                let composed = BlockMap::compose_all(&maps)?;
                self.cas.insert(name.clone(), composed);
            }
            CommandKind::CaBall { bound, filename, generators } => {
                let gens = generators
                    .iter()
                    .map(|g| Ok((g.clone(), self.ca(g)?.clone())))
                    .collect::<Result<Vec<_>, SessionError>>()?;
                let path = self.log_dir.join(format!("{filename}.output"));
                let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
                let report = ca_ball(&gens, *bound as usize, &mut file)?;
                file.flush()?;
                writeln!(
                    out,
                    "CA ball: {} CAs, {} relations, log written to {}{}",
                    report.total,
                    report.relations.len(),
                    path.display(),
                    self.timing(start)
                )?;
            }
            CommandKind::MinimumDensity { name, periods, threads } => {
                let x = self.sft(name)?;
                let w = WeightMap::from_pairs(x.alphabet(), &self.weights)?;
                let k = transverse_periods(x.topology().dimension(), periods)?;
                let ub = minimum_density_upper(x, &k, &w, threads.unwrap_or(self.threads))?;
                writeln!(out, "upper bound: {}{}", ub.bound, self.timing(start))?;
            }
            CommandKind::DensityLowerBound { name, radius, domain, vectors } => {
                let x = self.sft(name)?;
                let w = WeightMap::from_pairs(x.alphabet(), &self.weights)?;
                let d = x.topology().dimension();
                let dom = domain.iter().map(|n| node_ref(x.topology(), n)).collect::<Result<Vec<_>, _>>()?;
                let vs = vectors
                    .iter()
                    .map(|v| {
                        if v.len() == d {
                            Ok(Vector::from_slice(v))
                        } else {
                            Err(SessionError::Periods(format!("{v:?} has the wrong dimension")))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let lb = density_lower_bound(x, &w, &dom, &vs, *radius, &MicroLp)?;
                writeln!(out, "lower bound: {}{}", format_bound(lb.bound), self.timing(start))?;
            }
            CommandKind::Tiler { name, port } => {
                let session = TilerSession::new(name.clone(), self.sft(name)?.clone())?;
                let port = port.unwrap_or(self.default_port);
                match self.tiler_mode {
                    TilerMode::Check => writeln!(out, "tiler for {name} ready (not serving)")?,
                    TilerMode::Serve => {
                        writeln!(out, "tiler for {name} at http://127.0.0.1:{port}/state")?;
                        out.flush()?;
                        shiftlab_tiler::serve_blocking(session, port)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Rounds to six decimals for display and drops trailing zeros.
pub fn format_bound(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn describe_point(x: &Sft, p: &PeriodicPoint) -> String {
    let gens: Vec<String> = p.lattice.generators().iter().map(|g| g.to_string()).collect();
    format!("{} with periods {}", p.pattern.display(x.topology(), x.alphabet()), gens.join(" "))
}

/// Drops vectors along the first axis and checks that d−1 remain.
fn transverse_periods(d: usize, periods: &[Vec<i32>]) -> Result<Vec<Vector>, SessionError> {
    let mut out = Vec::new();
    for p in periods {
        if p.len() != d {
            return Err(SessionError::Periods(format!("{p:?} has the wrong dimension")));
        }
        if p[1..].iter().any(|&c| c != 0) {
            out.push(Vector::from_slice(p));
        }
    }
    if out.len() != d - 1 {
        return Err(SessionError::Periods(format!("need {} vectors off the first axis, got {}", d - 1, out.len())));
    }
    Ok(out)
}

fn node_ref(t: &Topology, n: &NodeLit) -> Result<NodeRef, SessionError> {
    if n.offset.len() != t.dimension() {
        return Err(SessionError::NodeDimension(format!("{:?}", n)));
    }
    let r = t.node_index(&n.node).ok_or_else(|| SessionError::UnknownNode(n.node.clone()))?;
    Ok(NodeRef::new(Vector::from_slice(&n.offset), r))
}

fn build_topology(decl: &TopologyDecl) -> Result<Topology, SessionError> {
    match decl {
        TopologyDecl::Builtin(name) => Ok(Topology::builtin(name)?),
        TopologyDecl::Custom(edges) => {
            let mut names: Vec<String> = Vec::new();
            let mut index: HashMap<String, u32> = HashMap::new();
            let mut id = |s: &str, names: &mut Vec<String>| {
                *index.entry(s.to_string()).or_insert_with(|| {
                    names.push(s.to_string());
                    names.len() as u32 - 1
                })
            };
            let d = edges.first().map(|e| e.source.offset.len()).unwrap_or(0);
            let mut specs = Vec::new();
            for e in edges {
                if e.source.offset.len() != d || e.target.offset.len() != d {
                    return Err(SessionError::NodeDimension(format!("{:?}", e.target)));
                }
                let source = id(&e.source.node, &mut names);
                let target = id(&e.target.node, &mut names);
                let off: Vec<i32> = e.target.offset.iter().zip(&e.source.offset).map(|(a, b)| a - b).collect();
                specs.push(EdgeSpec {
                    label: e.label.clone(),
                    source,
                    target: NodeRef::new(Vector::from_slice(&off), target),
                });
            }
            Ok(Topology::new(d, names, specs)?)
        }
    }
}
