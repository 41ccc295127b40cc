use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use shiftlab::sft::{Pattern, Sft, SftError};
use shiftlab::topology::{NodeRef, Vector};
use thiserror::Error;

pub const DEFAULT_SIDE: u32 = 16;
pub const DEFAULT_NODE_CAP: usize = 4096;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TilerError {
    #[error("the tiler supports 1- and 2-dimensional topologies, not {0}")]
    Dimension(usize),
    #[error("node {0} is outside the window")]
    OutOfWindow(String),
    #[error("unknown node name `{0}`")]
    UnknownNode(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("cell has {got} coordinates, expected {expected}")]
    CellShape { expected: usize, got: usize },
    #[error("window must have positive size in every direction")]
    EmptyWindow,
    #[error("window has {nodes} nodes, more than the cap of {cap}")]
    TooLarge { nodes: usize, cap: usize },
    #[error("a completion is already running")]
    Busy,
    #[error("solver failure: {0}")]
    Solver(String),
}

impl From<SftError> for TilerError {
    fn from(e: SftError) -> Self {
        TilerError::Solver(e.to_string())
    }
}

/// A node as it appears on the wire.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeJson {
    pub cell: Vec<i32>,
    pub node: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub node: NodeJson,
    pub symbol: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub origin: Vec<i32>,
    pub size: Vec<u32>,
}

impl Window {
    fn contains(&self, cell: &Vector) -> bool {
        cell.coords()
            .iter()
            .zip(self.origin.iter().zip(&self.size))
            .all(|(&c, (&o, &s))| c >= o && (c - o) < s as i32)
    }

    fn cells(&self) -> Vec<Vector> {
        let mut out = vec![Vec::new()];
        for (o, s) in self.origin.iter().zip(&self.size) {
            out = out
                .into_iter()
                .flat_map(|p: Vec<i32>| {
                    (0..*s as i32).map(move |i| {
                        let mut q = p.clone();
                        q.push(o + i);
                        q
                    })
                })
                .collect();
        }
        out.into_iter().map(|c| Vector::from_slice(&c)).collect()
    }

    fn cell_count(&self) -> usize {
        self.size.iter().map(|&s| s as usize).product()
    }
}

/// Where to draw each representative inside its cell, as fractions of the cell side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub nodes_per_cell: usize,
    pub offsets: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Idle,
    Completed,
    Unsatisfiable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub sft: String,
    pub dimension: usize,
    pub nodes: Vec<String>,
    pub alphabet: Vec<String>,
    pub geometry: Geometry,
    pub window: Window,
    pub pinned: Vec<Assignment>,
    pub filled: Vec<Assignment>,
    pub status: Status,
}

/// What a completion needs, detached from the session so it can run elsewhere.
#[derive(Clone, Debug)]
pub struct CompletionJob {
    pub sft: Sft,
    pub partial: Pattern,
    pub domain: BTreeSet<NodeRef>,
    pub generation: u64,
}

impl CompletionJob {
    pub fn run(&self) -> Result<Option<Pattern>, TilerError> {
        Ok(self.sft.deduce(&self.partial, &self.domain)?)
    }
}

/// Window, pins and the last completion for one SFT.
#[derive(Clone, Debug)]
pub struct TilerSession {
    name: String,
    sft: Sft,
    window: Window,
    cap: usize,
    pinned: BTreeMap<NodeRef, usize>,
    filled: BTreeMap<NodeRef, usize>,
    status: Status,
    // bumped on every change of pins or window; stale completions are discarded
    generation: u64,
}

impl TilerSession {
    pub fn new(name: impl Into<String>, sft: Sft) -> Result<Self, TilerError> {
        Self::with_cap(name, sft, DEFAULT_NODE_CAP)
    }

    pub fn with_cap(name: impl Into<String>, sft: Sft, cap: usize) -> Result<Self, TilerError> {
        let d = sft.topology().dimension();
        if d == 0 || d > 2 {
            return Err(TilerError::Dimension(d));
        }
        let window = Window { origin: vec![0; d], size: vec![DEFAULT_SIDE; d] };
        let s = TilerSession {
            name: name.into(),
            sft,
            window: window.clone(),
            cap,
            pinned: BTreeMap::new(),
            filled: BTreeMap::new(),
            status: Status::Idle,
            generation: 0,
        };
        s.check_window(&window)?;
        Ok(s)
    }

    pub fn sft(&self) -> &Sft {
        &self.sft
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn pinned(&self) -> &BTreeMap<NodeRef, usize> {
        &self.pinned
    }

    pub fn filled(&self) -> &BTreeMap<NodeRef, usize> {
        &self.filled
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn node_from_json(&self, n: &NodeJson) -> Result<NodeRef, TilerError> {
        let d = self.sft.topology().dimension();
        if n.cell.len() != d {
            return Err(TilerError::CellShape { expected: d, got: n.cell.len() });
        }
        let r = self.sft.topology().node_index(&n.node).ok_or_else(|| TilerError::UnknownNode(n.node.clone()))?;
        Ok(NodeRef::new(Vector::from_slice(&n.cell), r))
    }

    pub fn node_to_json(&self, n: &NodeRef) -> NodeJson {
        NodeJson { cell: n.offset.coords().to_vec(), node: self.sft.topology().node_name(n.node).to_string() }
    }

    fn assignments(&self, m: &BTreeMap<NodeRef, usize>) -> Vec<Assignment> {
        m.iter()
            .map(|(n, &s)| Assignment { node: self.node_to_json(n), symbol: self.sft.alphabet().name(s).to_string() })
            .collect()
    }

    pub fn state(&self) -> StateView {
        let t = self.sft.topology();
        let r = t.node_count();
        let d = t.dimension();
        let offsets = (0..r)
            .map(|i| {
                let f = (i as f64 + 0.5) / r as f64;
                (0..d).map(|_| f).collect()
            })
            .collect();
        StateView {
            sft: self.name.clone(),
            dimension: d,
            nodes: t.nodes().to_vec(),
            alphabet: self.sft.alphabet().symbols().to_vec(),
            geometry: Geometry { nodes_per_cell: r, offsets },
            window: self.window.clone(),
            pinned: self.assignments(&self.pinned),
            filled: self.assignments(&self.filled),
            status: self.status,
        }
    }

    fn touch(&mut self) {
        self.filled.clear();
        self.status = Status::Idle;
        self.generation += 1;
    }

    /// Pins `symbol` at `node`, replacing an earlier pin there.
    pub fn pin(&mut self, node: &NodeJson, symbol: &str) -> Result<(), TilerError> {
        let n = self.node_from_json(node)?;
        if !self.window.contains(&n.offset) {
            return Err(TilerError::OutOfWindow(format!("{node:?}")));
        }
        let s = self.sft.alphabet().index(symbol).ok_or_else(|| TilerError::UnknownSymbol(symbol.to_string()))?;
        self.pinned.insert(n, s);
        self.touch();
        Ok(())
    }

    pub fn unpin(&mut self, node: &NodeJson) -> Result<(), TilerError> {
        let n = self.node_from_json(node)?;
        self.pinned.remove(&n);
        self.touch();
        Ok(())
    }

    fn check_window(&self, w: &Window) -> Result<(), TilerError> {
        let d = self.sft.topology().dimension();
        if w.origin.len() != d || w.size.len() != d {
            return Err(TilerError::CellShape { expected: d, got: w.origin.len().max(w.size.len()) });
        }
        if w.size.contains(&0) {
            return Err(TilerError::EmptyWindow);
        }
        let nodes = w.cell_count().saturating_mul(self.sft.topology().node_count());
        if nodes > self.cap {
            return Err(TilerError::TooLarge { nodes, cap: self.cap });
        }
        Ok(())
    }

    /// Replaces the window; returns the pins that fell outside it and were dropped.
    pub fn resize(&mut self, w: Window) -> Result<Vec<NodeJson>, TilerError> {
        self.check_window(&w)?;
        let dropped: Vec<NodeRef> = self.pinned.keys().filter(|n| !w.contains(&n.offset)).cloned().collect();
        for n in &dropped {
            self.pinned.remove(n);
        }
        self.window = w;
        self.touch();
        Ok(dropped.iter().map(|n| self.node_to_json(n)).collect())
    }

    pub fn domain(&self) -> BTreeSet<NodeRef> {
        let t = self.sft.topology();
        self.window.cells().iter().flat_map(|c| t.cell_nodes(c)).collect()
    }

    pub fn completion_job(&self) -> CompletionJob {
        CompletionJob {
            sft: self.sft.clone(),
            partial: self.pinned.iter().map(|(n, &s)| (n.clone(), s)).collect(),
            domain: self.domain(),
            generation: self.generation,
        }
    }

    /// Stores the result of `job`; returns false if pins or window changed in the meantime.
    pub fn apply_completion(&mut self, job: &CompletionJob, result: Option<Pattern>) -> bool {
        if job.generation != self.generation {
            return false;
        }
        match result {
            Some(p) => {
                self.filled = p.iter().filter(|(n, _)| !self.pinned.contains_key(n)).map(|(n, s)| (n.clone(), s)).collect();
                self.status = Status::Completed;
            }
            None => {
                self.filled.clear();
                self.status = Status::Unsatisfiable;
            }
        }
        true
    }

    pub fn complete(&mut self) -> Result<Status, TilerError> {
        let job = self.completion_job();
        let result = job.run()?;
        self.apply_completion(&job, result);
        Ok(self.status)
    }

    /// Pinned and filled symbols together.
    pub fn patch(&self) -> Pattern {
        self.pinned.iter().chain(&self.filled).map(|(n, &s)| (n.clone(), s)).collect()
    }
}
