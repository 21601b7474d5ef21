//! Split and merge operations on geodesic loops, the combinatorial expansion
//! of the Casimir operator acting on holonomy traces, and the
//! continuous-time split-and-merge chain.
//!
//! Crossing positions refer to the canonical representative of a loop: a
//! crossing of `(x, y)` at position `i` means `x_i = x` and `x_{i+1} = y`.

mod chain;

use std::collections::BTreeMap;

use serde::Serialize;

pub use chain::{
    channels, sample_transition, simulate_chain, ChainContext, ChainMode, ChainPath, Channel, Diagonal, Jump,
    RateSummary, Trajectory,
};

use crate::error::{Error, Result};
use crate::loops::{Loop, LoopCollection};
use crate::topology::{OrientedEdge, PlaquetteIndex, Vertex};

fn require_geodesic(l: &Loop) -> Result<()> {
    if l.is_trivial() || !l.is_geodesic() {
        return Err(Error::NotGeodesic);
    }
    Ok(())
}

fn unordered(a: Loop, b: Loop) -> (Loop, Loop) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Cuts `l` at positions `i1 < i2` into `x_{[i1, i2)}` and `x_{[i2, i1 + p)}`.
/// Used for positive splits (crossing positions) and vertex splits (visit positions).
pub(crate) fn split_at(l: &Loop, i1: usize, i2: usize) -> (Loop, Loop) {
    let c = l.cycle();
    let (i1, i2) = (i1.min(i2), i1.max(i2));
    let first = c[i1..i2].to_vec();
    let second: Vec<Vertex> = c[i2..].iter().chain(&c[..i1]).copied().collect();
    (Loop::from_cycle(first), Loop::from_cycle(second))
}

/// Negative split: crossing of `(x, y)` at `i1`, crossing of `(y, x)` at `i2`.
/// Both bridges are cyclically reduced.
pub(crate) fn split_neg_at(l: &Loop, i1: usize, i2: usize) -> (Loop, Loop) {
    let p = l.len();
    let r = l.rotated(i1);
    let j = (i2 + p - i1) % p;
    let bridge_y = &r[1..j];
    let bridge_x = &r[j + 1..];
    (Loop::reduced_from_cycle(bridge_y), Loop::reduced_from_cycle(bridge_x))
}

/// Concatenation at positions `i1` of `a` and `i2` of `b` (same starting vertex).
pub(crate) fn merge_at(a: &Loop, i1: usize, b: &Loop, i2: usize) -> Loop {
    let mut c = a.rotated(i1);
    c.extend(b.rotated(i2));
    Loop::from_cycle(c)
}

/// Merge with cancellation: `a` crosses `(x, y)` at `i1`, `b` crosses `(y, x)` at `i2`.
pub(crate) fn merge_neg_at(a: &Loop, i1: usize, b: &Loop, i2: usize) -> Loop {
    let ra = a.rotated(i1);
    let rb = b.rotated(i2);
    let mut c: Vec<Vertex> = ra[1..].to_vec();
    c.extend_from_slice(&rb[1..]);
    Loop::reduced_from_cycle(&c)
}

/// All positive splits of `l` at the oriented edge `e`: one unordered pair per
/// unordered pair of distinct crossings.
pub fn split_pos_all(l: &Loop, e: OrientedEdge) -> Result<Vec<(Loop, Loop)>> {
    require_geodesic(l)?;
    let xs = l.crossings(e.tail, e.head);
    let mut out = Vec::new();
    for (a, &i1) in xs.iter().enumerate() {
        for &i2 in &xs[a + 1..] {
            let (u, v) = split_at(l, i1, i2);
            out.push(unordered(u, v));
        }
    }
    Ok(out)
}

/// All negative splits at `(x, y)`: one pair per (crossing of `(x, y)`, crossing of `(y, x)`).
pub fn split_neg_all(l: &Loop, e: OrientedEdge) -> Result<Vec<(Loop, Loop)>> {
    require_geodesic(l)?;
    let fwd = l.crossings(e.tail, e.head);
    let bwd = l.crossings(e.head, e.tail);
    let mut out = Vec::with_capacity(fwd.len() * bwd.len());
    for &i1 in &fwd {
        for &i2 in &bwd {
            let (u, v) = split_neg_at(l, i1, i2);
            out.push(unordered(u, v));
        }
    }
    Ok(out)
}

/// All positive merges of `a` and `b` at a common crossing of `e`.
pub fn merge_pos_all(a: &Loop, b: &Loop, e: OrientedEdge) -> Result<Vec<Loop>> {
    require_geodesic(a)?;
    require_geodesic(b)?;
    let xa = a.crossings(e.tail, e.head);
    let xb = b.crossings(e.tail, e.head);
    let mut out = Vec::with_capacity(xa.len() * xb.len());
    for &i1 in &xa {
        for &i2 in &xb {
            out.push(merge_at(a, i1, b, i2));
        }
    }
    Ok(out)
}

/// All negative merges: `a` crossing `(x, y)`, `b` crossing `(y, x)`; outputs reduced.
pub fn merge_neg_all(a: &Loop, b: &Loop, e: OrientedEdge) -> Result<Vec<Loop>> {
    require_geodesic(a)?;
    require_geodesic(b)?;
    let xa = a.crossings(e.tail, e.head);
    let xb = b.crossings(e.head, e.tail);
    let mut out = Vec::with_capacity(xa.len() * xb.len());
    for &i1 in &xa {
        for &i2 in &xb {
            out.push(merge_neg_at(a, i1, b, i2));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TermClass {
    SplitPlus,
    SplitMinus,
    MergePlus,
    MergeMinus,
    DMergePlus,
    DMergeMinus,
    VertexSplit,
    VertexMerge,
}

impl TermClass {
    pub fn is_deformation(self) -> bool {
        matches!(self, TermClass::DMergePlus | TermClass::DMergeMinus)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub class: TermClass,
    /// Integer weight; deformation terms are further scaled by `k / d` on evaluation.
    pub coefficient: i64,
    pub collection: LoopCollection,
}

/// Signed expansion of minus the Casimir operator applied to a product of
/// traces:
///
/// `-A tau(c) = d * p_total * tau(c) + sum_terms w(term) * tau(term)`
///
/// with `w = coefficient` for split/merge classes and `w = (k/d) * coefficient`
/// for plaquette-merge classes.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorExpansion {
    pub p_total: usize,
    pub terms: Vec<Term>,
    pub deformation_k: Option<f64>,
}

impl GeneratorExpansion {
    /// Weight of a term at dimension `d`.
    pub fn weight(&self, term: &Term, d: usize) -> f64 {
        if term.class.is_deformation() {
            self.deformation_k.unwrap_or(0.0) / d as f64 * term.coefficient as f64
        } else {
            term.coefficient as f64
        }
    }

    pub fn count(&self, class: TermClass) -> usize {
        self.terms.iter().filter(|t| t.class == class).count()
    }
}

/// Deformation by plaquette merges with coupling `k`.
#[derive(Debug, Clone, Copy)]
pub struct Deformation<'a> {
    pub k: f64,
    pub plaquettes: &'a PlaquetteIndex,
    pub graph: &'a crate::topology::Graph,
}

struct TermAccumulator {
    map: BTreeMap<(TermClass, LoopCollection), i64>,
}

impl TermAccumulator {
    fn new() -> Self {
        Self { map: BTreeMap::new() }
    }

    fn push(&mut self, class: TermClass, coefficient: i64, collection: LoopCollection) {
        *self.map.entry((class, collection)).or_insert(0) += coefficient;
    }

    fn finish(self) -> Vec<Term> {
        self.map
            .into_iter()
            .filter(|(_, c)| *c != 0)
            .map(|((class, collection), coefficient)| Term { class, coefficient, collection })
            .collect()
    }
}

fn replace_one(c: &LoopCollection, removed: &[&Loop], added: &[Loop]) -> LoopCollection {
    let mut out = c.clone();
    for r in removed {
        let ok = out.remove_one(r);
        debug_assert!(ok);
    }
    for a in added {
        out.add(a.clone(), 1);
    }
    out
}

/// Crossing positions of a loop grouped by oriented step.
fn crossing_table(l: &Loop) -> BTreeMap<(Vertex, Vertex), Vec<usize>> {
    let mut t: BTreeMap<(Vertex, Vertex), Vec<usize>> = BTreeMap::new();
    for (i, step) in l.steps().enumerate() {
        t.entry(step).or_default().push(i);
    }
    t
}

/// Expansion of `-A tau` for a collection of geodesic (or trivial) loops,
/// optionally with plaquette-merge deformation terms.
pub fn generator_expansion(c: &LoopCollection, deformation: Option<Deformation<'_>>) -> Result<GeneratorExpansion> {
    for (l, _) in c.entries() {
        if !l.is_trivial() && !l.is_geodesic() {
            return Err(Error::NotGeodesic);
        }
    }
    let mut acc = TermAccumulator::new();
    let entries = c.entries();
    let tables: Vec<_> = entries.iter().map(|(l, _)| crossing_table(l)).collect();

    for ((l, m), table) in entries.iter().zip(&tables) {
        if l.is_trivial() {
            continue;
        }
        let m = *m as i64;
        for (&(x, y), xs) in table {
            // positive splits, within one oriented edge
            for (a, &i1) in xs.iter().enumerate() {
                for &i2 in &xs[a + 1..] {
                    let (u, v) = split_at(l, i1, i2);
                    acc.push(TermClass::SplitPlus, 2 * m, replace_one(c, &[l], &[u, v]));
                }
            }
            // negative splits, once per unordered edge
            if x < y {
                if let Some(ys) = table.get(&(y, x)) {
                    for &i1 in xs {
                        for &i2 in ys {
                            let (u, v) = split_neg_at(l, i1, i2);
                            acc.push(TermClass::SplitMinus, -2 * m, replace_one(c, &[l], &[u, v]));
                        }
                    }
                }
            }
        }
    }

    for i in 0..entries.len() {
        for j in i..entries.len() {
            let (li, mi) = &entries[i];
            let (lj, mj) = &entries[j];
            if li.is_trivial() || lj.is_trivial() {
                continue;
            }
            let pairs = if i == j {
                (*mi as i64) * (*mi as i64 - 1) / 2
            } else {
                *mi as i64 * *mj as i64
            };
            if pairs == 0 {
                continue;
            }
            for (&(x, y), xs) in &tables[i] {
                if let Some(ys) = tables[j].get(&(x, y)) {
                    for &i1 in xs {
                        for &i2 in ys {
                            let merged = merge_at(li, i1, lj, i2);
                            acc.push(TermClass::MergePlus, 2 * pairs, replace_one(c, &[li, lj], &[merged]));
                        }
                    }
                }
                if let Some(ys) = tables[j].get(&(y, x)) {
                    for &i1 in xs {
                        for &i2 in ys {
                            let merged = merge_neg_at(li, i1, lj, i2);
                            acc.push(TermClass::MergeMinus, -2 * pairs, replace_one(c, &[li, lj], &[merged]));
                        }
                    }
                }
            }
        }
    }

    if let Some(def) = deformation {
        let graph = def.graph;
        for ((l, m), table) in entries.iter().zip(&tables) {
            if l.is_trivial() {
                continue;
            }
            let m = *m as i64;
            for (&(x, y), xs) in table {
                let fwd = graph.oriented_index(x, y).ok_or(Error::InvalidPath(x, y))?;
                let bwd = graph.oriented_index(y, x).ok_or(Error::InvalidPath(y, x))?;
                for &i1 in xs {
                    for &(p, pos) in def.plaquettes.through(fwd) {
                        let merged = merge_at(l, i1, &def.plaquettes.plaquettes[p], pos);
                        acc.push(TermClass::DMergePlus, m, replace_one(c, &[l], &[merged]));
                    }
                    for &(p, pos) in def.plaquettes.through(bwd) {
                        let merged = merge_neg_at(l, i1, &def.plaquettes.plaquettes[p], pos);
                        acc.push(TermClass::DMergeMinus, -m, replace_one(c, &[l], &[merged]));
                    }
                }
            }
        }
    }

    Ok(GeneratorExpansion {
        p_total: c.total_length(),
        terms: acc.finish(),
        deformation_k: deformation.map(|d| d.k),
    })
}

/// Expansion of `-A^(X) T` for discrete loops under vertex insertions:
/// `d * S * T + 2 * (vertex splits) + 2 * (vertex merges)`.
pub fn vertex_expansion(c: &LoopCollection) -> GeneratorExpansion {
    let mut acc = TermAccumulator::new();
    let entries = c.entries();
    let visit_tables: Vec<BTreeMap<Vertex, Vec<usize>>> = entries
        .iter()
        .map(|(l, _)| {
            let mut t: BTreeMap<Vertex, Vec<usize>> = BTreeMap::new();
            for (i, &v) in l.cycle().iter().enumerate() {
                t.entry(v).or_default().push(i);
            }
            t
        })
        .collect();
    for ((l, m), table) in entries.iter().zip(&visit_tables) {
        for xs in table.values() {
            for (a, &i1) in xs.iter().enumerate() {
                for &i2 in &xs[a + 1..] {
                    let (u, v) = split_at(l, i1, i2);
                    acc.push(TermClass::VertexSplit, 2 * *m as i64, replace_one(c, &[l], &[u, v]));
                }
            }
        }
    }
    for i in 0..entries.len() {
        for j in i..entries.len() {
            let (li, mi) = &entries[i];
            let (lj, mj) = &entries[j];
            let pairs = if i == j {
                (*mi as i64) * (*mi as i64 - 1) / 2
            } else {
                *mi as i64 * *mj as i64
            };
            if pairs == 0 {
                continue;
            }
            for (x, xs) in &visit_tables[i] {
                if let Some(ys) = visit_tables[j].get(x) {
                    for &i1 in xs {
                        for &i2 in ys {
                            let merged = merge_at(li, i1, lj, i2);
                            acc.push(TermClass::VertexMerge, 2 * pairs, replace_one(c, &[li, lj], &[merged]));
                        }
                    }
                }
            }
        }
    }
    GeneratorExpansion { p_total: c.total_length(), terms: acc.finish(), deformation_k: None }
}
