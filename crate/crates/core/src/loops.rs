//! Based loops, cyclic loop classes, geodesic reduction, loop collections and
//! edge networks (occupation fields, Eulerian networks, flows).

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{Graph, Vertex};

/// A closed path `(x0, x1, ..., xp = x0)` whose steps are graph edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasedLoop {
    vertices: Vec<Vertex>,
}

impl BasedLoop {
    /// Validates a closed vertex sequence. The final vertex must repeat the first.
    pub fn new(graph: &Graph, vertices: Vec<Vertex>) -> Result<Self> {
        if vertices.len() < 3 || vertices.first() != vertices.last() {
            return Err(Error::Parse("a based loop needs p >= 2 steps and must close".into()));
        }
        for w in vertices.windows(2) {
            if !graph.has_edge(w[0], w[1]) {
                return Err(Error::InvalidPath(w[0], w[1]));
            }
        }
        Ok(Self { vertices })
    }

    /// Closed sequence including the repeated base point.
    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Number of steps `p`.
    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cycle(&self) -> &[Vertex] {
        &self.vertices[..self.vertices.len() - 1]
    }

    /// Shift by `k` positions.
    pub fn rotate(&self, k: usize) -> BasedLoop {
        let c = self.cycle();
        let k = k % c.len();
        let mut v: Vec<_> = c[k..].iter().chain(&c[..k]).copied().collect();
        v.push(v[0]);
        BasedLoop { vertices: v }
    }
}

/// A loop: the class of a based loop under rotation, stored by its
/// lexicographically least rotation without the repeated base point.
/// The empty sequence is the trivial loop.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Loop {
    cycle: Vec<Vertex>,
}

impl fmt::Debug for Loop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.cycle.is_empty() {
            return write!(f, "Loop(trivial)");
        }
        write!(f, "Loop{:?}", self.based())
    }
}

impl Loop {
    pub fn trivial() -> Self {
        Self { cycle: Vec::new() }
    }

    /// Canonical class of a cyclic vertex sequence (no repeated endpoint).
    pub fn from_cycle(mut cycle: Vec<Vertex>) -> Self {
        let k = least_rotation(&cycle);
        cycle.rotate_left(k);
        Self { cycle }
    }

    /// Cyclic reduction followed by canonicalization.
    pub fn reduced_from_cycle(cycle: &[Vertex]) -> Self {
        Self::from_cycle(cyclic_reduce(cycle))
    }

    pub fn is_trivial(&self) -> bool {
        self.cycle.is_empty()
    }

    /// Length `p`.
    pub fn len(&self) -> usize {
        self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycle.is_empty()
    }

    /// Canonical cyclic sequence `(x0, ..., x_{p-1})`.
    pub fn cycle(&self) -> &[Vertex] {
        &self.cycle
    }

    /// Canonical based representative `(x0, ..., x_{p-1}, x0)`.
    pub fn based(&self) -> Vec<Vertex> {
        let mut v = self.cycle.clone();
        if let Some(&first) = v.first() {
            v.push(first);
        }
        v
    }

    /// Steps `(x_i, x_{i+1})` for `i = 0..p`, cyclically.
    pub fn steps(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        let p = self.cycle.len();
        (0..p).map(move |i| (self.cycle[i], self.cycle[(i + 1) % p]))
    }

    /// No backtracking, including across the base point.
    pub fn is_geodesic(&self) -> bool {
        is_cyclically_reduced(&self.cycle)
    }

    pub fn reversed(&self) -> Loop {
        let mut c = self.cycle.clone();
        c.reverse();
        Loop::from_cycle(c)
    }

    /// Cyclic sequence rotated to start at position `k`.
    pub fn rotated(&self, k: usize) -> Vec<Vertex> {
        let mut c = self.cycle.clone();
        if !c.is_empty() {
            let n = c.len();
            c.rotate_left(k % n);
        }
        c
    }

    /// Positions `i` with `(x_i, x_{i+1}) = (u, v)`.
    pub fn crossings(&self, u: Vertex, v: Vertex) -> Vec<usize> {
        self.steps()
            .enumerate()
            .filter(|&(_, (a, b))| a == u && b == v)
            .map(|(i, _)| i)
            .collect()
    }

    /// Positions `i` with `x_i = x`.
    pub fn visits(&self, x: Vertex) -> Vec<usize> {
        self.cycle.iter().enumerate().filter(|&(_, &v)| v == x).map(|(i, _)| i).collect()
    }

    /// Checks every step against the graph.
    pub fn validate(&self, graph: &Graph) -> Result<()> {
        for (u, v) in self.steps() {
            if !graph.has_edge(u, v) {
                return Err(Error::InvalidPath(u, v));
            }
        }
        Ok(())
    }
}

/// Booth's least-rotation algorithm.
pub(crate) fn least_rotation(s: &[Vertex]) -> usize {
    let n = s.len();
    if n < 2 {
        return 0;
    }
    let mut fail = vec![usize::MAX; 2 * n];
    let mut k = 0usize;
    for j in 1..2 * n {
        let sj = s[j % n];
        let mut i = fail[j - k - 1];
        while i != usize::MAX && sj != s[(k + i + 1) % n] {
            if sj < s[(k + i + 1) % n] {
                k = j - i - 1;
            }
            i = fail[i];
        }
        if i == usize::MAX && sj != s[(k + i.wrapping_add(1)) % n] {
            if sj < s[k % n] {
                k = j;
            }
            fail[j - k] = usize::MAX;
        } else {
            fail[j - k] = i.wrapping_add(1);
        }
    }
    k % n
}

fn is_cyclically_reduced(c: &[Vertex]) -> bool {
    let p = c.len();
    if p == 0 {
        return true;
    }
    if p < 2 {
        return false;
    }
    (0..p).all(|i| c[(i + p - 1) % p] != c[(i + 1) % p])
}

/// Removes consecutive opposite steps, including across the junction.
/// Input is a cyclic sequence (closing step implied).
pub(crate) fn cyclic_reduce(cycle: &[Vertex]) -> Vec<Vertex> {
    if cycle.is_empty() {
        return Vec::new();
    }
    let mut stack: Vec<Vertex> = Vec::with_capacity(cycle.len() + 1);
    for &w in cycle.iter().chain(std::iter::once(&cycle[0])) {
        let n = stack.len();
        if n >= 2 && stack[n - 2] == w {
            stack.pop();
        } else {
            stack.push(w);
        }
    }
    // stack is a reduced path from cycle[0] back to cycle[0]
    let mut lo = 0usize;
    let mut hi = stack.len() - 1;
    while hi - lo >= 2 && stack[lo + 1] == stack[hi - 1] {
        lo += 1;
        hi -= 1;
    }
    if hi == lo {
        return Vec::new();
    }
    stack[lo..hi].to_vec()
}

/// Geodesic loop `w^R` associated with a based loop.
pub fn reduce(graph: &Graph, w: &BasedLoop) -> Result<Loop> {
    for s in w.vertices().windows(2) {
        if !graph.has_edge(s[0], s[1]) {
            return Err(Error::InvalidPath(s[0], s[1]));
        }
    }
    Ok(Loop::reduced_from_cycle(w.cycle()))
}

/// Rotation-minimal representative, without reduction.
pub fn canonicalize(graph: &Graph, w: &BasedLoop) -> Result<Loop> {
    for s in w.vertices().windows(2) {
        if !graph.has_edge(s[0], s[1]) {
            return Err(Error::InvalidPath(s[0], s[1]));
        }
    }
    Ok(Loop::from_cycle(w.cycle().to_vec()))
}

/// Multiset of loops, kept sorted by loop.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LoopCollection {
    entries: Vec<(Loop, u32)>,
}

impl fmt::Debug for LoopCollection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.iter()).finish()
    }
}

impl LoopCollection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(l: Loop) -> Self {
        Self { entries: vec![(l, 1)] }
    }

    pub fn from_loops<I: IntoIterator<Item = Loop>>(loops: I) -> Self {
        let mut v: Vec<Loop> = loops.into_iter().collect();
        v.sort_unstable();
        let mut entries: Vec<(Loop, u32)> = Vec::with_capacity(v.len());
        for l in v {
            match entries.last_mut() {
                Some((last, m)) if *last == l => *m += 1,
                _ => entries.push((l, 1)),
            }
        }
        Self { entries }
    }

    pub fn add(&mut self, l: Loop, multiplicity: u32) {
        if multiplicity == 0 {
            return;
        }
        match self.entries.binary_search_by(|(x, _)| x.cmp(&l)) {
            Ok(i) => self.entries[i].1 += multiplicity,
            Err(i) => self.entries.insert(i, (l, multiplicity)),
        }
    }

    /// Removes one copy; returns false if absent.
    pub fn remove_one(&mut self, l: &Loop) -> bool {
        match self.entries.binary_search_by(|(x, _)| x.cmp(l)) {
            Ok(i) => {
                if self.entries[i].1 == 1 {
                    self.entries.remove(i);
                } else {
                    self.entries[i].1 -= 1;
                }
                true
            }
            Err(_) => false,
        }
    }

    pub fn entries(&self) -> &[(Loop, u32)] {
        &self.entries
    }

    /// Every copy, multiplicities expanded.
    pub fn copies(&self) -> impl Iterator<Item = &Loop> + '_ {
        self.entries.iter().flat_map(|(l, m)| std::iter::repeat_n(l, *m as usize))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of loops counted with multiplicity.
    pub fn count(&self) -> usize {
        self.entries.iter().map(|(_, m)| *m as usize).sum()
    }

    /// `sum_i mult_i * p(loop_i)`.
    pub fn total_length(&self) -> usize {
        self.entries.iter().map(|(l, m)| l.len() * *m as usize).sum()
    }

    pub fn all_geodesic(&self) -> bool {
        self.entries.iter().all(|(l, _)| l.is_geodesic())
    }

    /// Collection with every member reduced.
    pub fn reduced(&self) -> LoopCollection {
        LoopCollection::from_loops(self.copies().map(|l| Loop::reduced_from_cycle(l.cycle())))
    }

    pub fn validate(&self, graph: &Graph) -> Result<()> {
        self.entries.iter().try_for_each(|(l, _)| l.validate(graph))
    }
}

/// Non-negative integer function on oriented edges, indexed by
/// [`Graph::oriented_index`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    counts: Vec<u64>,
}

impl Network {
    pub fn zero(graph: &Graph) -> Self {
        Self { counts: vec![0; 2 * graph.edge_count()] }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `k_{x,y}`; zero off the edge set.
    pub fn get(&self, graph: &Graph, x: Vertex, y: Vertex) -> u64 {
        graph.oriented_index(x, y).map_or(0, |i| self.counts[i])
    }

    pub fn set(&mut self, graph: &Graph, x: Vertex, y: Vertex, value: u64) -> Result<()> {
        let i = graph
            .oriented_index(x, y)
            .ok_or_else(|| Error::NotAnEdge(graph.label(x).to_string(), graph.label(y).to_string()))?;
        self.counts[i] = value;
        Ok(())
    }

    pub fn out_totals(&self, graph: &Graph) -> Vec<u64> {
        let mut out = vec![0; graph.vertex_count()];
        for (i, &c) in self.counts.iter().enumerate() {
            out[graph.oriented_edge(i).tail as usize] += c;
        }
        out
    }

    pub fn in_totals(&self, graph: &Graph) -> Vec<u64> {
        let mut inn = vec![0; graph.vertex_count()];
        for (i, &c) in self.counts.iter().enumerate() {
            inn[graph.oriented_edge(i).head as usize] += c;
        }
        inn
    }

    pub fn is_eulerian(&self, graph: &Graph) -> bool {
        self.out_totals(graph) == self.in_totals(graph)
    }

    /// Eulerian and vanishing on one direction of every edge.
    pub fn is_flow(&self, graph: &Graph) -> bool {
        self.is_eulerian(graph) && self.counts.chunks(2).all(|c| c[0] == 0 || c[1] == 0)
    }

    /// `|k| = sum_x k_x`.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Per-edge differences `k_{x,y} - k_{y,x}` for the positive orientation.
    pub fn differences(&self) -> Vec<i64> {
        self.counts.chunks(2).map(|c| c[0] as i64 - c[1] as i64).collect()
    }
}

impl std::ops::Add for &Network {
    type Output = Network;
    fn add(self, rhs: &Network) -> Network {
        Network { counts: self.counts.iter().zip(&rhs.counts).map(|(a, b)| a + b).collect() }
    }
}

/// Adds the crossings of `l` with weight `mult` to `counts`.
pub(crate) fn accumulate_crossings(graph: &Graph, l: &Loop, mult: u64, counts: &mut [u64]) {
    for (u, v) in l.steps() {
        let i = graph.oriented_index(u, v).expect("loop step is not an edge");
        counts[i] += mult;
    }
}

/// Edge occupation field `N_{x,y}` of a collection.
pub fn occupation(graph: &Graph, c: &LoopCollection) -> Network {
    let mut counts = vec![0u64; 2 * graph.edge_count()];
    for (l, m) in c.entries() {
        accumulate_crossings(graph, l, *m as u64, &mut counts);
    }
    Network { counts }
}

/// Occupation statistics of a collection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stats {
    /// `S = sum_x N_x`
    pub s: u64,
    /// `V = sum_x N_x^2`
    pub v: u64,
    /// `V+ = sum over oriented edges of N_{x,y}^2`
    pub v_plus: u64,
    /// `V- = 2 sum over unordered edges of N_{x,y} N_{y,x}`
    pub v_minus: u64,
    pub vertex: Vec<u64>,
    pub edge: Network,
}

pub fn stats(graph: &Graph, c: &LoopCollection) -> Stats {
    let edge = occupation(graph, c);
    stats_of_network(graph, edge)
}

pub fn stats_of_network(graph: &Graph, edge: Network) -> Stats {
    let vertex = edge.out_totals(graph);
    let counts = edge.counts();
    let v_plus = counts.iter().map(|&c| c * c).sum();
    let v_minus = counts.chunks(2).map(|c| 2 * c[0] * c[1]).sum();
    Stats {
        s: vertex.iter().sum(),
        v: vertex.iter().map(|&n| n * n).sum(),
        v_plus,
        v_minus,
        vertex,
        edge,
    }
}

/// `J(k)_{x,y} = max(k_{x,y} - k_{y,x}, 0)`.
pub fn flow_of(graph: &Graph, k: &Network) -> Result<Network> {
    let out = k.out_totals(graph);
    let inn = k.in_totals(graph);
    if let Some(x) = (0..out.len()).find(|&x| out[x] != inn[x]) {
        return Err(Error::NotEulerian(x as Vertex));
    }
    let counts = k
        .counts()
        .chunks(2)
        .flat_map(|c| [c[0].saturating_sub(c[1]), c[1].saturating_sub(c[0])])
        .collect();
    Ok(Network { counts })
}

/// Markov matrix `q[j]` of a flow: `j_{x,y} / j_x`, identity rows where `j_x = 0`.
pub fn markov_of_flow(graph: &Graph, j: &Network) -> Result<Vec<Vec<Ratio<i64>>>> {
    if let Some(e) = j.counts().chunks(2).position(|c| c[0] != 0 && c[1] != 0) {
        let (u, v) = graph.edges()[e];
        return Err(Error::NotAFlow(u, v));
    }
    if !j.is_eulerian(graph) {
        return Err(Error::NotAFlow(0, 0));
    }
    let n = graph.vertex_count();
    let totals = j.out_totals(graph);
    let mut q = vec![vec![Ratio::from_integer(0); n]; n];
    for x in 0..n {
        if totals[x] == 0 {
            q[x][x] = Ratio::from_integer(1);
            continue;
        }
        for y in graph.neighbors(x as Vertex) {
            let jxy = j.get(graph, x as Vertex, y) as i64;
            q[x][y as usize] = Ratio::new(jxy, totals[x] as i64);
        }
    }
    Ok(q)
}

/// Net winding of a collection around each torus axis.
pub fn winding(graph: &Graph, c: &LoopCollection) -> Option<Vec<i64>> {
    let (side, dim) = graph.torus_shape()?;
    let mut total = vec![0i64; dim];
    for (l, m) in c.entries() {
        for (u, v) in l.steps() {
            let (axis, sign) = graph.torus_direction(u, v)?;
            total[axis] += sign * *m as i64;
        }
    }
    debug_assert!(total.iter().all(|t| t % side as i64 == 0));
    Some(total.into_iter().map(|t| t / side as i64).collect())
}

/// JSON form of a loop collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionDoc {
    pub loops: Vec<LoopDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopDoc {
    pub vertices: Vec<crate::topology::Label>,
    #[serde(default = "one")]
    pub multiplicity: u32,
}

fn one() -> u32 {
    1
}

impl CollectionDoc {
    pub fn from_collection(graph: &Graph, c: &LoopCollection) -> Self {
        let loops = c
            .entries()
            .iter()
            .map(|(l, m)| LoopDoc {
                vertices: l.based().iter().map(|&v| graph.label(v).clone()).collect(),
                multiplicity: *m,
            })
            .collect();
        Self { loops }
    }

    /// Builds the collection. Loops are canonicalized but not reduced.
    pub fn to_collection(&self, graph: &Graph) -> Result<LoopCollection> {
        let mut c = LoopCollection::new();
        for doc in &self.loops {
            if doc.vertices.is_empty() {
                c.add(Loop::trivial(), doc.multiplicity);
                continue;
            }
            let verts = doc
                .vertices
                .iter()
                .map(|lab| graph.vertex_of(lab).ok_or_else(|| Error::UnknownVertex(lab.to_string())))
                .collect::<Result<Vec<_>>>()?;
            let based = BasedLoop::new(graph, verts)?;
            c.add(canonicalize(graph, &based)?, doc.multiplicity);
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_min_rotation(c: &[Vertex]) -> Vec<Vertex> {
        (0..c.len().max(1))
            .map(|k| {
                let mut r = c.to_vec();
                if !r.is_empty() {
                    r.rotate_left(k);
                }
                r
            })
            .min()
            .unwrap()
    }

    const A: Vertex = 0;
    const B: Vertex = 1;
    const C: Vertex = 2;
    const D: Vertex = 3;

    fn based(g: &Graph, v: &[Vertex]) -> BasedLoop {
        BasedLoop::new(g, v.to_vec()).unwrap()
    }

    #[test]
    fn reduce_examples() {
        let tri = Graph::cycle(3).unwrap();
        assert!(reduce(&tri, &based(&tri, &[A, B, A])).unwrap().is_trivial());
        let l = reduce(&tri, &based(&tri, &[A, B, C, A])).unwrap();
        assert_eq!(l.based(), vec![A, B, C, A]);
        assert!(l.is_geodesic());
        let k4 = Graph::complete(4).unwrap();
        let l = reduce(&k4, &based(&k4, &[A, B, D, C, B, A])).unwrap();
        assert_eq!(l, Loop::from_cycle(vec![B, D, C]));
        let sq = Graph::cycle(4).unwrap();
        assert_eq!(
            reduce(&sq, &BasedLoop { vertices: vec![A, C, A] }),
            Err(Error::InvalidPath(A, C))
        );
    }

    #[test]
    fn canonicalize_examples() {
        let tri = Graph::cycle(3).unwrap();
        let l = canonicalize(&tri, &based(&tri, &[B, C, A, B])).unwrap();
        assert_eq!(l.based(), vec![A, B, C, A]);
        let l = canonicalize(&tri, &based(&tri, &[A, B, C, A])).unwrap();
        assert_eq!(l.based(), vec![A, B, C, A]);
        let l = canonicalize(&tri, &based(&tri, &[B, C, A, B, C, A, B])).unwrap();
        assert_eq!(l.based(), vec![A, B, C, A, B, C, A]);
    }

    #[test]
    fn occupation_and_stats_examples() {
        let g = Graph::cycle(3).unwrap();
        let tri = Loop::from_cycle(vec![A, B, C]);
        let rev = tri.reversed();
        let n = occupation(&g, &LoopCollection::single(tri.clone()));
        assert_eq!((n.get(&g, A, B), n.get(&g, B, C), n.get(&g, C, A)), (1, 1, 1));
        assert_eq!((n.get(&g, B, A), n.get(&g, A, A)), (0, 0));
        let mut two = LoopCollection::single(tri.clone());
        two.add(tri.clone(), 1);
        let n2 = occupation(&g, &two);
        assert_eq!(n2.counts(), (&n + &n).counts());

        let s = stats(&g, &LoopCollection::single(tri.clone()));
        assert_eq!((s.s, s.v, s.v_plus, s.v_minus), (3, 3, 3, 0));
        let both = LoopCollection::from_loops([tri.clone(), rev]);
        let n = occupation(&g, &both);
        assert!(n.counts().iter().all(|&c| c == 1));
        let s = stats(&g, &both);
        assert_eq!((s.s, s.v_plus, s.v_minus), (6, 6, 6));
        let double = LoopCollection::single(Loop::from_cycle(vec![A, B, C, A, B, C]));
        let s = stats(&g, &double);
        assert_eq!((s.s, s.v_plus, s.v_minus), (6, 12, 0));
        let trivial = LoopCollection::single(Loop::trivial());
        assert_eq!(occupation(&g, &trivial).total(), 0);
    }

    #[test]
    fn flow_examples() {
        let g = Graph::cycle(3).unwrap();
        let mut k = Network::zero(&g);
        k.set(&g, A, B, 3).unwrap();
        k.set(&g, B, A, 1).unwrap();
        k.set(&g, B, C, 2).unwrap();
        k.set(&g, C, A, 2).unwrap();
        assert!(k.is_eulerian(&g));
        let j = flow_of(&g, &k).unwrap();
        assert_eq!((j.get(&g, A, B), j.get(&g, B, A)), (2, 0));
        assert!(j.is_flow(&g));
        assert_eq!(flow_of(&g, &j).unwrap(), j);

        let mut bal = Network::zero(&g);
        bal.set(&g, A, B, 2).unwrap();
        bal.set(&g, B, A, 2).unwrap();
        let j = flow_of(&g, &bal).unwrap();
        assert_eq!(j.total(), 0);

        let mut bad = Network::zero(&g);
        bad.set(&g, A, B, 1).unwrap();
        assert!(matches!(flow_of(&g, &bad), Err(Error::NotEulerian(_))));
    }

    #[test]
    fn markov_examples() {
        let g = Graph::cycle(3).unwrap();
        let j = occupation(&g, &LoopCollection::single(Loop::from_cycle(vec![A, B, C])));
        let q = markov_of_flow(&g, &j).unwrap();
        let one = Ratio::from_integer(1);
        assert_eq!((q[0][1], q[1][2], q[2][0]), (one, one, one));

        // on K4: a->b twice, a->c once, returning through d
        let k4 = Graph::complete(4).unwrap();
        let mut j = Network::zero(&k4);
        j.set(&k4, A, B, 2).unwrap();
        j.set(&k4, A, C, 1).unwrap();
        j.set(&k4, B, D, 2).unwrap();
        j.set(&k4, C, D, 1).unwrap();
        j.set(&k4, D, A, 3).unwrap();
        let q = markov_of_flow(&k4, &j).unwrap();
        assert_eq!(q[0], vec![Ratio::from_integer(0), Ratio::new(2, 3), Ratio::new(1, 3), Ratio::from_integer(0)]);
        let totals = j.out_totals(&k4);
        for y in 0..4 {
            let s: Ratio<i64> = (0..4).map(|x| Ratio::from_integer(totals[x] as i64) * q[x][y]).sum();
            assert_eq!(s, Ratio::from_integer(totals[y] as i64));
        }

        let mut zero_row = Network::zero(&g);
        zero_row.set(&g, A, B, 0).unwrap();
        let q = markov_of_flow(&g, &zero_row).unwrap();
        assert_eq!(q[1][1], one);

        let both = occupation(&g, &LoopCollection::from_loops([Loop::from_cycle(vec![A, B, C]), Loop::from_cycle(vec![A, C, B])]));
        assert!(matches!(markov_of_flow(&g, &both), Err(Error::NotAFlow(..))));
    }

    #[test]
    fn json_roundtrip() {
        let g = Graph::cycle(3).unwrap();
        let doc: CollectionDoc =
            serde_json::from_str(r#"{"loops":[{"vertices":[1,2,0,1],"multiplicity":2},{"vertices":[]}]}"#).unwrap();
        let c = doc.to_collection(&g).unwrap();
        assert_eq!(c.count(), 3);
        assert_eq!(CollectionDoc::from_collection(&g, &c).to_collection(&g).unwrap(), c);
        let t = Graph::torus(3, 2).unwrap();
        let doc: CollectionDoc =
            serde_json::from_str(r#"{"loops":[{"vertices":[[0,0],[1,0],[1,1],[0,1],[0,0]]}]}"#).unwrap();
        assert_eq!(doc.to_collection(&t).unwrap().total_length(), 4);
    }

    fn random_walk_strategy(g: &'static Graph) -> impl Strategy<Value = Vec<Vertex>> {
        (0..g.vertex_count() as Vertex, prop::collection::vec(any::<u32>(), 1..40)).prop_map(move |(start, picks)| {
            let mut walk = vec![start];
            for p in picks {
                let cur = *walk.last().unwrap();
                let nbrs: Vec<_> = g.neighbors(cur).collect();
                walk.push(nbrs[p as usize % nbrs.len()]);
            }
            // close with a shortest path back
            let back = crate::generate::shortest_path(g, *walk.last().unwrap(), start);
            walk.extend_from_slice(&back[1..]);
            walk
        })
    }

    fn leak(g: Graph) -> &'static Graph {
        Box::leak(Box::new(g))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn booth_matches_brute_force(c in prop::collection::vec(0u32..3, 0..12)) {
            let l = Loop::from_cycle(c.clone());
            prop_assert_eq!(l.cycle().to_vec(), brute_min_rotation(&c));
        }

        #[test]
        fn reduction_properties(walk in random_walk_strategy(leak(Graph::complete(4).unwrap())), k in 0usize..50) {
            let g = Graph::complete(4).unwrap();
            if walk.len() < 3 { return Ok(()); }
            let w = BasedLoop::new(&g, walk).unwrap();
            let r = reduce(&g, &w).unwrap();
            prop_assert!(r.is_geodesic());
            if !r.is_trivial() {
                let again = reduce(&g, &BasedLoop::new(&g, r.based()).unwrap()).unwrap();
                prop_assert_eq!(&again, &r);
            }
            prop_assert_eq!(reduce(&g, &w.rotate(k)).unwrap(), r.clone());
            prop_assert_eq!(canonicalize(&g, &w.rotate(k)).unwrap(), canonicalize(&g, &w).unwrap());
            let raw = Loop::from_cycle(w.cycle().to_vec());
            prop_assert_eq!(
                occupation(&g, &LoopCollection::single(raw.clone())).differences(),
                occupation(&g, &LoopCollection::single(r.clone())).differences()
            );
            prop_assert!(occupation(&g, &LoopCollection::single(raw)).is_eulerian(&g));
        }

        #[test]
        fn torus_reduction_preserves_flow(walk in random_walk_strategy(leak(Graph::torus(3, 2).unwrap()))) {
            let g = Graph::torus(3, 2).unwrap();
            if walk.len() < 3 { return Ok(()); }
            let w = BasedLoop::new(&g, walk).unwrap();
            let raw = LoopCollection::single(canonicalize(&g, &w).unwrap());
            let red = raw.reduced();
            let f1 = flow_of(&g, &occupation(&g, &raw)).unwrap();
            let f2 = flow_of(&g, &occupation(&g, &red)).unwrap();
            prop_assert_eq!(f1, f2);
            prop_assert_eq!(winding(&g, &raw), winding(&g, &red));
        }
    }
}
