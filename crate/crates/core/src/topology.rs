//! Z^d-like graphs: a finite set of representative nodes, translated over Z^d,
//! with named edges that are invariant under translation.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use smallvec::SmallVec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("unknown built-in topology `{0}` (available: line, square, hex)")]
    UnknownBuiltin(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate node name `{0}`")]
    DuplicateNode(String),
    #[error("unknown node name `{0}`")]
    UnknownNode(String),
    #[error("edge `{label}` is declared twice from node `{node}`")]
    DuplicateEdge { label: String, node: String },
    #[error("node {node} has no edge named `{label}`")]
    NoSuchEdge { node: String, label: String },
    #[error("topology dimension must be positive")]
    ZeroDimension,
}

/// An integer vector in Z^d.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Vector(pub SmallVec<[i32; 3]>);

impl Vector {
    pub fn zero(dim: usize) -> Self {
        Vector(SmallVec::from_elem(0, dim))
    }

    pub fn from_slice(coords: &[i32]) -> Self {
        Vector(SmallVec::from_slice(coords))
    }

    /// The i-th standard basis vector of Z^dim.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = Self::zero(dim);
        v.0[i] = 1;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn scale(&self, k: i32) -> Vector {
        Vector(self.0.iter().map(|c| c * k).collect())
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        if self.0.len() == 1 {
            write!(f, ",")?;
        }
        write!(f, ")")
    }
}

impl Add<&Vector> for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), rhs.dim());
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub<&Vector> for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), rhs.dim());
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        Vector(self.0.iter().map(|a| -a).collect())
    }
}

/// A node of the graph: a cell offset together with a representative index.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub offset: Vector,
    pub node: u32,
}

impl NodeRef {
    pub fn new(offset: Vector, node: u32) -> Self {
        NodeRef { offset, node }
    }

    pub fn origin(dim: usize, node: u32) -> Self {
        NodeRef { offset: Vector::zero(dim), node }
    }

    /// Translation by `v`, panicking on dimension mismatch in debug builds.
    pub fn shifted(&self, v: &Vector) -> NodeRef {
        NodeRef { offset: &self.offset + v, node: self.node }
    }
}

impl fmt::Debug for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.offset, self.node)
    }
}

/// Checked translation `v · n`.
pub fn translate(n: &NodeRef, v: &Vector) -> Result<NodeRef, TopologyError> {
    if n.offset.dim() != v.dim() {
        return Err(TopologyError::DimensionMismatch { expected: n.offset.dim(), got: v.dim() });
    }
    Ok(n.shifted(v))
}

/// A named edge from a representative node (at the origin cell) to `target`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeSpec {
    pub label: String,
    pub source: u32,
    pub target: NodeRef,
}

#[derive(Clone, Debug)]
pub struct Topology {
    dimension: usize,
    nodes: Vec<String>,
    edges: Vec<EdgeSpec>,
    // undirected neighbours of each representative, as (offset, node) relative to the origin cell
    neighbours: Vec<Vec<NodeRef>>,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.dimension == other.dimension && self.nodes == other.nodes && self.edges == other.edges
    }
}

impl Eq for Topology {}

impl Topology {
    pub fn new(dimension: usize, nodes: Vec<String>, edges: Vec<EdgeSpec>) -> Result<Self, TopologyError> {
        if dimension == 0 {
            return Err(TopologyError::ZeroDimension);
        }
        let mut seen = HashSet::new();
        for n in &nodes {
            if !seen.insert(n.as_str()) {
                return Err(TopologyError::DuplicateNode(n.clone()));
            }
        }
        let mut labels = HashSet::new();
        for e in &edges {
            if e.source as usize >= nodes.len() {
                return Err(TopologyError::UnknownNode(e.source.to_string()));
            }
            if e.target.node as usize >= nodes.len() {
                return Err(TopologyError::UnknownNode(e.target.node.to_string()));
            }
            if e.target.offset.dim() != dimension {
                return Err(TopologyError::DimensionMismatch { expected: dimension, got: e.target.offset.dim() });
            }
            if !labels.insert((e.label.as_str(), e.source)) {
                return Err(TopologyError::DuplicateEdge {
                    label: e.label.clone(),
                    node: nodes[e.source as usize].clone(),
                });
            }
        }
        let mut neighbours: Vec<BTreeSet<NodeRef>> = vec![BTreeSet::new(); nodes.len()];
        for e in &edges {
            let src = NodeRef::origin(dimension, e.source);
            if e.target != src {
                neighbours[e.source as usize].insert(e.target.clone());
                neighbours[e.target.node as usize].insert(NodeRef::new(-&e.target.offset, e.source));
            }
        }
        Ok(Topology {
            dimension,
            nodes,
            edges,
            neighbours: neighbours.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn builtin(name: &str) -> Result<Self, TopologyError> {
        let v = Vector::from_slice;
        let edge = |label: &str, source: u32, offset: &[i32], target: u32| EdgeSpec {
            label: label.to_string(),
            source,
            target: NodeRef::new(v(offset), target),
        };
        let (dim, nodes, edges) = match name {
            "line" => (1, vec!["0"], vec![edge("rt", 0, &[1], 0), edge("lt", 0, &[-1], 0)]),
            "square" => (
                2,
                vec!["0"],
                vec![
                    edge("up", 0, &[0, 1], 0),
                    edge("dn", 0, &[0, -1], 0),
                    edge("rt", 0, &[1, 0], 0),
                    edge("lt", 0, &[-1, 0], 0),
                ],
            ),
            // brick-wall hexagonal grid: node 0 links up, node 1 links down
            "hex" => (
                2,
                vec!["0", "1"],
                vec![
                    edge("lt", 0, &[-1, 0], 1),
                    edge("lt", 1, &[0, 0], 0),
                    edge("rt", 0, &[0, 0], 1),
                    edge("rt", 1, &[1, 0], 0),
                    edge("up", 0, &[0, 1], 1),
                    edge("dn", 1, &[0, -1], 0),
                ],
            ),
            other => return Err(TopologyError::UnknownBuiltin(other.to_string())),
        };
        Topology::new(dim, nodes.into_iter().map(String::from).collect(), edges)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeSpec] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, name: &str) -> Option<u32> {
        self.nodes.iter().position(|n| n == name).map(|i| i as u32)
    }

    pub fn node_name(&self, node: u32) -> &str {
        &self.nodes[node as usize]
    }

    /// The nodes of the cell at `offset`.
    pub fn cell_nodes(&self, offset: &Vector) -> Vec<NodeRef> {
        (0..self.nodes.len() as u32).map(|r| NodeRef::new(offset.clone(), r)).collect()
    }

    pub fn has_edge(&self, source: u32, label: &str) -> bool {
        self.edges.iter().any(|e| e.source == source && e.label == label)
    }

    /// Walks the directed edge `label` out of `n`.
    pub fn follow_edge(&self, n: &NodeRef, label: &str) -> Result<NodeRef, TopologyError> {
        self.edges
            .iter()
            .find(|e| e.source == n.node && e.label == label)
            .map(|e| e.target.shifted(&n.offset))
            .ok_or_else(|| TopologyError::NoSuchEdge {
                node: self.display_node(n),
                label: label.to_string(),
            })
    }

    /// Undirected neighbours of `n`.
    pub fn neighbours<'a>(&'a self, n: &'a NodeRef) -> impl Iterator<Item = NodeRef> + 'a {
        self.neighbours[n.node as usize].iter().map(move |m| m.shifted(&n.offset))
    }

    pub fn adjacent(&self, a: &NodeRef, b: &NodeRef) -> bool {
        let rel = NodeRef::new(&b.offset - &a.offset, b.node);
        self.neighbours[a.node as usize].binary_search(&rel).is_ok()
    }

    /// All nodes within undirected path distance `radius` of `center`.
    pub fn ball(&self, center: &NodeRef, radius: u32) -> BTreeSet<NodeRef> {
        self.ball_around(std::slice::from_ref(center), radius)
    }

    /// Union of the balls of the given radius around each of `centers`.
    pub fn ball_around(&self, centers: &[NodeRef], radius: u32) -> BTreeSet<NodeRef> {
        let mut seen: BTreeSet<NodeRef> = centers.iter().cloned().collect();
        let mut queue: VecDeque<(NodeRef, u32)> = centers.iter().map(|c| (c.clone(), 0)).collect();
        while let Some((n, d)) = queue.pop_front() {
            if d == radius {
                continue;
            }
            for m in self.neighbours(&n) {
                if seen.insert(m.clone()) {
                    queue.push_back((m, d + 1));
                }
            }
        }
        seen
    }

    pub fn display_node(&self, n: &NodeRef) -> String {
        let mut s = String::from("(");
        for c in n.offset.coords() {
            s.push_str(&c.to_string());
            s.push(',');
        }
        s.push_str(self.nodes.get(n.node as usize).map(String::as_str).unwrap_or("?"));
        s.push(')');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nr(off: &[i32], node: u32) -> NodeRef {
        NodeRef::new(Vector::from_slice(off), node)
    }

    #[test]
    fn builtins() {
        let hex = Topology::builtin("hex").unwrap();
        assert_eq!(hex.node_count(), 2);
        assert_eq!(hex.edges().len(), 6);
        assert!(hex
            .edges()
            .iter()
            .any(|e| e.label == "lt" && e.source == 0 && e.target == nr(&[-1, 0], 1)));
        let sq = Topology::builtin("square").unwrap();
        assert_eq!((sq.node_count(), sq.edges().len()), (1, 4));
        let line = Topology::builtin("line").unwrap();
        assert_eq!(line.follow_edge(&nr(&[0], 0), "rt").unwrap(), nr(&[1], 0));
        assert_eq!(line.follow_edge(&nr(&[0], 0), "lt").unwrap(), nr(&[-1], 0));
        let err = Topology::builtin("torus").unwrap_err();
        assert!(err.to_string().contains("line, square, hex"));
    }

    #[test]
    fn translation() {
        assert_eq!(translate(&nr(&[0, 0], 0), &Vector::from_slice(&[1, 0])).unwrap(), nr(&[1, 0], 0));
        assert_eq!(translate(&nr(&[2, -1], 1), &Vector::zero(2)).unwrap(), nr(&[2, -1], 1));
        assert_eq!(translate(&nr(&[1, 1], 0), &Vector::from_slice(&[-1, -1])).unwrap(), nr(&[0, 0], 0));
        assert!(translate(&nr(&[1, 1], 0), &Vector::from_slice(&[1])).is_err());
    }

    #[test]
    fn edges_are_followed_in_the_declared_direction() {
        let hex = Topology::builtin("hex").unwrap();
        assert_eq!(hex.follow_edge(&nr(&[0, 0], 0), "lt").unwrap(), nr(&[-1, 0], 1));
        assert_eq!(hex.follow_edge(&nr(&[5, 3], 0), "rt").unwrap(), nr(&[5, 3], 1));
        let sq = Topology::builtin("square").unwrap();
        assert_eq!(sq.follow_edge(&nr(&[0, 0], 0), "up").unwrap(), nr(&[0, 1], 0));
        let err = hex.follow_edge(&nr(&[0, 0], 0), "dn").unwrap_err();
        assert_eq!(err.to_string(), "node (0,0,0) has no edge named `dn`");
    }

    #[test]
    fn balls() {
        let sq = Topology::builtin("square").unwrap();
        assert_eq!(sq.ball(&nr(&[0, 0], 0), 1).len(), 5);
        assert_eq!(sq.ball(&nr(&[0, 0], 0), 2).len(), 13);
        let hex = Topology::builtin("hex").unwrap();
        let b: Vec<_> = hex.ball(&nr(&[0, 0], 0), 1).into_iter().collect();
        let mut want = vec![nr(&[0, 0], 0), nr(&[-1, 0], 1), nr(&[0, 0], 1), nr(&[0, 1], 1)];
        want.sort();
        assert_eq!(b, want);
        // hexagonal grid: 1 + 3 + 6 + 9 nodes within distance 3
        assert_eq!(hex.ball(&nr(&[0, 0], 1), 3).len(), 19);
        for t in [&sq, &hex] {
            assert_eq!(t.ball(&nr(&[4, 4], 0), 0).into_iter().collect::<Vec<_>>(), vec![nr(&[4, 4], 0)]);
        }
    }

    #[test]
    fn adjacency_is_symmetric() {
        let hex = Topology::builtin("hex").unwrap();
        let a = nr(&[0, 0], 1);
        for b in hex.neighbours(&a).collect::<Vec<_>>() {
            assert!(hex.adjacent(&a, &b) && hex.adjacent(&b, &a));
        }
        assert!(!hex.adjacent(&a, &a));
        assert!(!hex.adjacent(&nr(&[0, 0], 0), &nr(&[0, -1], 1)));
    }

    #[test]
    fn label_reuse_needs_distinct_sources() {
        let e = |src: u32| EdgeSpec { label: "x".into(), source: src, target: nr(&[1], 0) };
        assert!(Topology::new(1, vec!["a".into(), "b".into()], vec![e(0), e(1)]).is_ok());
        assert!(matches!(
            Topology::new(1, vec!["a".into(), "b".into()], vec![e(0), e(0)]),
            Err(TopologyError::DuplicateEdge { .. })
        ));
    }
}
