//! Finite simple graphs, the discrete torus, spanning trees and plaquettes.
//!
//! Vertices are dense `u32` indices. The index order is the graph's vertex
//! order: lexicographic in the coordinate vector for tori, input order for
//! explicit graphs. Every unoriented edge `{u, v}` is stored once with
//! `u < v`, and `(u, v)` is its positive orientation.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loops::Loop;

pub type Vertex = u32;
pub type EdgeId = u32;

/// Human-facing vertex identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Name(String),
    Coord(Vec<i64>),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(i) => write!(f, "{i}"),
            Label::Name(s) => write!(f, "{s}"),
            Label::Coord(c) => write!(f, "{c:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphKind {
    Torus { side: usize, dim: usize },
    Cycle(usize),
    Complete(usize),
    Explicit,
}

/// Graph description as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphSpec {
    Torus {
        #[serde(rename = "L")]
        side: usize,
        n: usize,
    },
    Cycle {
        m: usize,
    },
    Complete {
        m: usize,
    },
    Explicit {
        vertices: Vec<Label>,
        edges: Vec<[Label; 2]>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrientedEdge {
    pub tail: Vertex,
    pub head: Vertex,
}

impl OrientedEdge {
    pub fn new(tail: Vertex, head: Vertex) -> Self {
        Self { tail, head }
    }

    pub fn reversed(self) -> Self {
        Self { tail: self.head, head: self.tail }
    }
}

#[derive(Debug, Clone)]
pub struct Graph {
    kind: GraphKind,
    labels: Vec<Label>,
    edges: Vec<(Vertex, Vertex)>,
    // (neighbor, edge id), sorted by neighbor
    adjacency: Vec<Vec<(Vertex, EdgeId)>>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.labels == other.labels && self.edges == other.edges
    }
}

impl Graph {
    pub fn build(spec: &GraphSpec) -> Result<Graph> {
        match spec {
            GraphSpec::Torus { side, n } => Graph::torus(*side, *n),
            GraphSpec::Cycle { m } => Graph::cycle(*m),
            GraphSpec::Complete { m } => Graph::complete(*m),
            GraphSpec::Explicit { vertices, edges } => {
                let index: HashMap<&Label, Vertex> =
                    vertices.iter().enumerate().map(|(i, l)| (l, i as Vertex)).collect();
                if index.len() != vertices.len() {
                    return Err(Error::Config("duplicate vertex label".into()));
                }
                let mut pairs = Vec::with_capacity(edges.len());
                for [a, b] in edges {
                    let u = *index.get(a).ok_or_else(|| Error::UnknownVertex(a.to_string()))?;
                    let v = *index.get(b).ok_or_else(|| Error::UnknownVertex(b.to_string()))?;
                    pairs.push((u, v));
                }
                Graph::from_edges(GraphKind::Explicit, vertices.clone(), &pairs)
            }
        }
    }

    /// Discrete torus `(Z/LZ)^n`.
    pub fn torus(side: usize, dim: usize) -> Result<Graph> {
        if side < 3 {
            return Err(Error::TorusTooSmall(side));
        }
        if dim < 2 {
            return Err(Error::TorusDimension(dim));
        }
        let count = side.pow(dim as u32);
        let labels: Vec<Label> = (0..count).map(|i| Label::Coord(torus_coords(i, side, dim))).collect();
        let mut pairs = Vec::with_capacity(count * dim);
        for v in 0..count {
            let c = torus_coords(v, side, dim);
            for axis in 0..dim {
                let mut w = c.clone();
                w[axis] = (w[axis] + 1) % side as i64;
                pairs.push((v as Vertex, torus_index(&w, side) as Vertex));
            }
        }
        Graph::from_edges(GraphKind::Torus { side, dim }, labels, &pairs)
    }

    pub fn cycle(m: usize) -> Result<Graph> {
        if m < 3 {
            return Err(Error::SelfLoopOrMultiEdge(format!("cycle({m})")));
        }
        let labels = (0..m as i64).map(Label::Int).collect();
        let pairs: Vec<_> = (0..m).map(|i| (i as Vertex, ((i + 1) % m) as Vertex)).collect();
        Graph::from_edges(GraphKind::Cycle(m), labels, &pairs)
    }

    pub fn complete(m: usize) -> Result<Graph> {
        if m < 2 {
            return Err(Error::Config(format!("complete({m}) needs at least two vertices")));
        }
        let labels = (0..m as i64).map(Label::Int).collect();
        let mut pairs = Vec::new();
        for u in 0..m {
            for v in u + 1..m {
                pairs.push((u as Vertex, v as Vertex));
            }
        }
        Graph::from_edges(GraphKind::Complete(m), labels, &pairs)
    }

    fn from_edges(kind: GraphKind, labels: Vec<Label>, pairs: &[(Vertex, Vertex)]) -> Result<Graph> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut edges = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            if a == b {
                return Err(Error::SelfLoopOrMultiEdge(labels[a as usize].to_string()));
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        for w in edges.windows(2) {
            if w[0] == w[1] {
                let (a, b) = w[0];
                return Err(Error::SelfLoopOrMultiEdge(format!(
                    "{}-{}",
                    labels[a as usize], labels[b as usize]
                )));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for (id, &(u, v)) in edges.iter().enumerate() {
            adjacency[u as usize].push((v, id as EdgeId));
            adjacency[v as usize].push((u, id as EdgeId));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let graph = Graph { kind, labels, edges, adjacency };
        if !graph.is_connected() {
            return Err(Error::DisconnectedGraph);
        }
        Ok(graph)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.vertex_count()];
        let mut stack = vec![0 as Vertex];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adjacency[u as usize] {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.vertex_count()
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, v: Vertex) -> &Label {
        &self.labels[v as usize]
    }

    pub fn vertex_of(&self, label: &Label) -> Option<Vertex> {
        if let (GraphKind::Torus { side, dim }, Label::Coord(c)) = (self.kind, label) {
            if c.len() != dim || c.iter().any(|&x| x < 0 || x >= side as i64) {
                return None;
            }
            return Some(torus_index(c, side) as Vertex);
        }
        self.labels.iter().position(|l| l == label).map(|i| i as Vertex)
    }

    /// Unoriented edges, each as `(u, v)` with `u < v`.
    pub fn edges(&self) -> &[(Vertex, Vertex)] {
        &self.edges
    }

    pub fn neighbors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.adjacency[v as usize].iter().map(|&(w, _)| w)
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adjacency[v as usize].len()
    }

    /// Edge id and orientation sign (`true` when `(u, v)` is the positive direction).
    #[inline]
    pub fn edge_between(&self, u: Vertex, v: Vertex) -> Option<(EdgeId, bool)> {
        let list = self.adjacency.get(u as usize)?;
        list.iter().find(|&&(w, _)| w == v).map(|&(_, id)| (id, u < v))
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        self.edge_between(u, v).is_some()
    }

    /// Dense index of an oriented edge in `0..2|E|`: `2e` positive, `2e + 1` negative.
    #[inline]
    pub fn oriented_index(&self, u: Vertex, v: Vertex) -> Option<usize> {
        self.edge_between(u, v).map(|(e, pos)| 2 * e as usize + usize::from(!pos))
    }

    pub fn oriented_edge(&self, index: usize) -> OrientedEdge {
        let (u, v) = self.edges[index / 2];
        if index % 2 == 0 {
            OrientedEdge::new(u, v)
        } else {
            OrientedEdge::new(v, u)
        }
    }

    pub fn oriented_edges(&self) -> impl Iterator<Item = OrientedEdge> + '_ {
        (0..2 * self.edge_count()).map(|i| self.oriented_edge(i))
    }

    /// Side and dimension when this is a torus.
    pub fn torus_shape(&self) -> Option<(usize, usize)> {
        match self.kind {
            GraphKind::Torus { side, dim } => Some((side, dim)),
            _ => None,
        }
    }

    pub fn coords(&self, v: Vertex) -> Option<Vec<i64>> {
        self.torus_shape().map(|(side, dim)| torus_coords(v as usize, side, dim))
    }

    /// Neighbor of `v` one step along `axis` in direction `sign` (torus only).
    pub fn torus_step(&self, v: Vertex, axis: usize, sign: i64) -> Option<Vertex> {
        let (side, _) = self.torus_shape()?;
        let mut c = self.coords(v)?;
        c[axis] = (c[axis] + sign).rem_euclid(side as i64);
        Some(torus_index(&c, side) as Vertex)
    }

    /// Axis and sign of the step `u -> v` on a torus.
    pub fn torus_direction(&self, u: Vertex, v: Vertex) -> Option<(usize, i64)> {
        let (side, _) = self.torus_shape()?;
        let a = self.coords(u)?;
        let b = self.coords(v)?;
        let side = side as i64;
        let mut found = None;
        for axis in 0..a.len() {
            let delta = (b[axis] - a[axis]).rem_euclid(side);
            if delta == 0 {
                continue;
            }
            let sign = if delta == 1 {
                1
            } else if delta == side - 1 {
                -1
            } else {
                return None;
            };
            if found.is_some() {
                return None;
            }
            found = Some((axis, sign));
        }
        found
    }

    pub fn spanning_tree(&self, root: Vertex) -> Result<SpanningTree> {
        if root as usize >= self.vertex_count() {
            return Err(Error::UnknownVertex(root.to_string()));
        }
        let n = self.vertex_count();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::new();
        seen[root as usize] = true;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(v, e) in &self.adjacency[u as usize] {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    parent[v as usize] = Some((u, e));
                    queue.push_back(v);
                }
            }
        }
        Ok(SpanningTree { root, parent, order, edge_total: self.edge_count() })
    }

    pub fn enumerate_plaquettes(&self) -> Result<Vec<Loop>> {
        let (_, dim) = self.torus_shape().ok_or(Error::NotATorus)?;
        let mut out = Vec::with_capacity(dim * (dim - 1) * self.vertex_count());
        for v in 0..self.vertex_count() as Vertex {
            for mu in 0..dim {
                for nu in 0..dim {
                    if mu == nu {
                        continue;
                    }
                    let a = self.torus_step(v, mu, 1).unwrap();
                    let b = self.torus_step(a, nu, 1).unwrap();
                    let c = self.torus_step(v, nu, 1).unwrap();
                    out.push(Loop::from_cycle(vec![v, a, b, c]));
                }
            }
        }
        Ok(out)
    }

    /// The `2(n-1)` plaquettes crossing the oriented edge `e`, each with the
    /// position of that crossing in the plaquette's canonical representative.
    pub fn plaquettes_containing(&self, e: OrientedEdge) -> Result<Vec<(Loop, usize)>> {
        let index = PlaquetteIndex::new(self)?;
        let oi = self
            .oriented_index(e.tail, e.head)
            .ok_or_else(|| Error::NotAnEdge(self.label(e.tail).to_string(), self.label(e.head).to_string()))?;
        Ok(index
            .through(oi)
            .iter()
            .map(|&(p, pos)| (index.plaquettes[p].clone(), pos))
            .collect())
    }
}

fn torus_coords(mut index: usize, side: usize, dim: usize) -> Vec<i64> {
    let mut c = vec![0i64; dim];
    for axis in (0..dim).rev() {
        c[axis] = (index % side) as i64;
        index /= side;
    }
    c
}

fn torus_index(c: &[i64], side: usize) -> usize {
    c.iter().fold(0usize, |acc, &x| acc * side + x as usize)
}

/// Breadth-first spanning tree.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    pub root: Vertex,
    /// `parent[v] = (u, edge)` for every non-root vertex.
    pub parent: Vec<Option<(Vertex, EdgeId)>>,
    /// Vertices in breadth-first order, root first.
    pub order: Vec<Vertex>,
    edge_total: usize,
}

impl SpanningTree {
    pub fn edge_ids(&self) -> Vec<EdgeId> {
        let mut ids: Vec<_> = self.parent.iter().flatten().map(|&(_, e)| e).collect();
        ids.sort_unstable();
        ids
    }

    pub fn edge_count(&self) -> usize {
        self.parent.iter().flatten().count()
    }

    pub fn vertex_count(&self) -> usize {
        self.parent.len()
    }

    pub(crate) fn graph_edge_total(&self) -> usize {
        self.edge_total
    }
}

/// Plaquettes of a torus with a per-oriented-edge lookup table.
#[derive(Debug, Clone)]
pub struct PlaquetteIndex {
    pub plaquettes: Vec<Loop>,
    // oriented edge index -> (plaquette index, crossing position)
    by_edge: Vec<Vec<(usize, usize)>>,
    dim: usize,
}

impl PlaquetteIndex {
    pub fn new(graph: &Graph) -> Result<Self> {
        let (_, dim) = graph.torus_shape().ok_or(Error::NotATorus)?;
        let plaquettes = graph.enumerate_plaquettes()?;
        let mut by_edge = vec![Vec::new(); 2 * graph.edge_count()];
        for (p, lp) in plaquettes.iter().enumerate() {
            for (pos, (u, v)) in lp.steps().enumerate() {
                let oi = graph.oriented_index(u, v).expect("plaquette step is an edge");
                by_edge[oi].push((p, pos));
            }
        }
        Ok(Self { plaquettes, by_edge, dim })
    }

    pub fn through(&self, oriented_index: usize) -> &[(usize, usize)] {
        &self.by_edge[oriented_index]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.plaquettes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plaquettes.is_empty()
    }
}
