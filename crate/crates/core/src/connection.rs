//! Connections and gauge fields on a graph, holonomy traces, gauge
//! transformations, the heat semigroup on connections, and both sides of the
//! Casimir intertwining identities.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loops::{Loop, LoopCollection};
use crate::splitmerge::{generator_expansion, vertex_expansion, Deformation, GeneratorExpansion};
use crate::topology::{EdgeId, Graph, Label, PlaquetteIndex, SpanningTree, Vertex};
use crate::unitary::{self, fd_casimir, fd_gamma, identity, Mat};

const UNITARY_TOL: f64 = 1e-8;

/// A unitary per edge, stored for the positive orientation `(u, v)`, `u < v`;
/// `m(v, u) = m(u, v)*`.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    graph: Arc<Graph>,
    d: usize,
    mats: Vec<Mat>,
}

impl Connection {
    pub fn new(graph: Arc<Graph>, d: usize, mats: Vec<Mat>) -> Result<Self> {
        if mats.len() != graph.edge_count() {
            return Err(Error::GraphMismatch);
        }
        for m in &mats {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::Config(format!("expected {d}x{d} matrices")));
            }
            let defect = unitary::unitary_defect(m);
            if defect > UNITARY_TOL {
                return Err(Error::NotUnitary(defect));
            }
        }
        Ok(Self { graph, d, mats })
    }

    pub fn trivial(graph: Arc<Graph>, d: usize) -> Self {
        let mats = vec![identity(d); graph.edge_count()];
        Self { graph, d, mats }
    }

    pub fn haar<R: Rng + ?Sized>(graph: Arc<Graph>, d: usize, rng: &mut R) -> Self {
        let mats = (0..graph.edge_count()).map(|_| unitary::haar_sample(d, rng)).collect();
        Self { graph, d, mats }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrices(&self) -> &[Mat] {
        &self.mats
    }

    pub fn matrix(&self, e: EdgeId) -> &Mat {
        &self.mats[e as usize]
    }

    pub fn set_matrix(&mut self, e: EdgeId, m: Mat) {
        self.mats[e as usize] = m;
    }

    /// `m(x, y)`.
    pub fn oriented(&self, x: Vertex, y: Vertex) -> Result<Mat> {
        let (e, positive) = self.graph.edge_between(x, y).ok_or(Error::InvalidPath(x, y))?;
        let m = &self.mats[e as usize];
        Ok(if positive { m.clone() } else { m.adjoint() })
    }

    fn same_graph(&self, other: &Graph) -> bool {
        std::ptr::eq(self.graph.as_ref(), other) || *self.graph == *other
    }

    /// `m(x_{p-1}, x_p) ... m(x_0, x_1)` along the canonical representative.
    pub fn holonomy(&self, l: &Loop) -> Result<Mat> {
        let mut h = identity(self.d);
        for (x, y) in l.steps() {
            let (e, positive) = self.graph.edge_between(x, y).ok_or(Error::InvalidPath(x, y))?;
            let m = &self.mats[e as usize];
            h = if positive { m * h } else { m.ad_mul(&h) };
        }
        Ok(h)
    }

    pub fn trace(&self, l: &Loop) -> Result<Complex64> {
        Ok(self.holonomy(l)?.trace())
    }

    /// `prod Tr h(l)` with multiplicity; the trivial loop contributes `d`, the
    /// empty collection gives 1.
    pub fn tau(&self, c: &LoopCollection) -> Result<Complex64> {
        let mut acc = Complex64::new(1.0, 0.0);
        for (l, m) in c.entries() {
            acc *= self.trace(l)?.powu(*m);
        }
        Ok(acc)
    }

    /// Product of traces over loop copies given as a slice.
    pub fn tau_of_loops(&self, loops: &[Loop]) -> Result<Complex64> {
        let mut acc = Complex64::new(1.0, 0.0);
        for l in loops {
            acc *= self.trace(l)?;
        }
        Ok(acc)
    }

    /// `m'(x, y) = h(y)^{-1} m(x, y) h(x)`.
    pub fn gauge_transform(&self, h: &GaugeField) -> Result<Connection> {
        if h.mats.len() != self.graph.vertex_count() || h.d != self.d {
            return Err(Error::GraphMismatch);
        }
        let mats = self
            .graph
            .edges()
            .iter()
            .zip(&self.mats)
            .map(|(&(u, v), m)| h.mats[v as usize].adjoint() * m * &h.mats[u as usize])
            .collect();
        Ok(Connection { graph: self.graph.clone(), d: self.d, mats })
    }

    /// Gauge-equivalent connection that is the identity on every tree edge,
    /// together with the gauge field used.
    pub fn tree_gauge_fix(&self, tree: &SpanningTree) -> Result<(Connection, GaugeField)> {
        let g = &self.graph;
        if tree.vertex_count() != g.vertex_count()
            || tree.graph_edge_total() != g.edge_count()
            || tree.edge_count() + 1 != g.vertex_count()
        {
            return Err(Error::TreeMismatch);
        }
        let mut field = vec![identity(self.d); g.vertex_count()];
        for &x in &tree.order {
            if let Some((p, e)) = tree.parent[x as usize] {
                let (e2, _) = g.edge_between(p, x).ok_or(Error::TreeMismatch)?;
                if e2 != e {
                    return Err(Error::TreeMismatch);
                }
                field[x as usize] = self.oriented(p, x)? * &field[p as usize];
            }
        }
        let field = GaugeField { d: self.d, mats: field };
        let mut fixed = self.gauge_transform(&field)?;
        // exact identities on the tree
        for e in tree.edge_ids() {
            fixed.mats[e as usize] = identity(self.d);
        }
        Ok((fixed, field))
    }

    /// Edges whose matrix differs from the identity by more than `tol`.
    pub fn non_identity_edges(&self, tol: f64) -> Vec<EdgeId> {
        let id = identity(self.d);
        (0..self.mats.len() as EdgeId)
            .filter(|&e| (&self.mats[e as usize] - &id).iter().any(|z| z.norm() > tol))
            .collect()
    }

    /// Exact first Lie derivative of `tau(c)` in direction `w` at edge `e`
    /// (left perturbation of the stored positive-orientation matrix).
    pub fn lie_derivative_exact(&self, c: &LoopCollection, e: EdgeId, w: &Mat) -> Result<Complex64> {
        let entries = c.entries();
        let mut traces = Vec::with_capacity(entries.len());
        let mut derivs = Vec::with_capacity(entries.len());
        for (l, _) in entries {
            let (t, dt) = self.trace_derivative(l, e, w)?;
            traces.push(t);
            derivs.push(dt);
        }
        let mut total = Complex64::new(0.0, 0.0);
        for (i, (_, m)) in entries.iter().enumerate() {
            if derivs[i] == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut term = *m as f64 * traces[i].powu(m - 1) * derivs[i];
            for (j, (_, mj)) in entries.iter().enumerate() {
                if j != i {
                    term *= traces[j].powu(*mj);
                }
            }
            total += term;
        }
        Ok(total)
    }

    /// `(Tr h, D_w Tr h)` for one loop, by inserting `w` at every crossing of `e`.
    fn trace_derivative(&self, l: &Loop, e: EdgeId, w: &Mat) -> Result<(Complex64, Complex64)> {
        let p = l.len();
        let mut factors = Vec::with_capacity(p);
        let mut marks = Vec::with_capacity(p);
        for (x, y) in l.steps() {
            let (id, positive) = self.graph.edge_between(x, y).ok_or(Error::InvalidPath(x, y))?;
            let m = &self.mats[id as usize];
            factors.push(if positive { m.clone() } else { m.adjoint() });
            marks.push((id == e).then_some(positive));
        }
        // prefix[i] = M_{i-1} ... M_0
        let mut prefix = Vec::with_capacity(p + 1);
        prefix.push(identity(self.d));
        for f in &factors {
            let next = f * prefix.last().unwrap();
            prefix.push(next);
        }
        let trace = prefix[p].trace();
        // suffix[i] = M_{p-1} ... M_{i+1}
        let mut suffix = vec![identity(self.d); p];
        for i in (0..p.saturating_sub(1)).rev() {
            suffix[i] = &suffix[i + 1] * &factors[i + 1];
        }
        let mut deriv = Complex64::new(0.0, 0.0);
        for i in 0..p {
            match marks[i] {
                Some(true) => deriv += (&suffix[i] * w * &factors[i] * &prefix[i]).trace(),
                Some(false) => deriv -= (&suffix[i] * &factors[i] * w * &prefix[i]).trace(),
                None => {}
            }
        }
        Ok((trace, deriv))
    }

    /// Copy with the matrix of edge `e` replaced.
    pub fn with_edge(&self, e: EdgeId, m: &Mat) -> Connection {
        let mut out = self.clone();
        out.mats[e as usize] = m.clone();
        out
    }

    /// Edges crossed by some loop of `c`, sorted.
    pub fn support(&self, c: &LoopCollection) -> Result<Vec<EdgeId>> {
        let mut ids = Vec::new();
        for (l, _) in c.entries() {
            for (x, y) in l.steps() {
                let (e, _) = self.graph.edge_between(x, y).ok_or(Error::InvalidPath(x, y))?;
                ids.push(e);
            }
        }
        ids.sort_unstable();
        ids.dedup();
        Ok(ids)
    }

    pub fn to_doc(&self) -> ConnectionDoc {
        ConnectionDoc {
            d: self.d,
            edges: self
                .graph
                .edges()
                .iter()
                .map(|&(u, v)| [self.graph.label(u).clone(), self.graph.label(v).clone()])
                .collect(),
            matrices: self
                .mats
                .iter()
                .map(|m| {
                    let mut rows = Vec::with_capacity(self.d * self.d);
                    for i in 0..self.d {
                        for j in 0..self.d {
                            rows.push([m[(i, j)].re, m[(i, j)].im]);
                        }
                    }
                    rows
                })
                .collect(),
        }
    }

    pub fn from_doc(graph: Arc<Graph>, doc: &ConnectionDoc) -> Result<Self> {
        let d = doc.d;
        if doc.edges.len() != graph.edge_count() || doc.matrices.len() != doc.edges.len() {
            return Err(Error::GraphMismatch);
        }
        let mut mats = vec![Mat::zeros(0, 0); graph.edge_count()];
        for ([a, b], entries) in doc.edges.iter().zip(&doc.matrices) {
            let u = graph.vertex_of(a).ok_or_else(|| Error::UnknownVertex(a.to_string()))?;
            let v = graph.vertex_of(b).ok_or_else(|| Error::UnknownVertex(b.to_string()))?;
            let (e, positive) = graph.edge_between(u, v).ok_or_else(|| Error::NotAnEdge(a.to_string(), b.to_string()))?;
            if entries.len() != d * d {
                return Err(Error::Parse(format!("edge ({a}, {b}) needs {} entries", d * d)));
            }
            let m = Mat::from_row_iterator(d, d, entries.iter().map(|&[re, im]| Complex64::new(re, im)));
            mats[e as usize] = if positive { m } else { m.adjoint() };
        }
        Connection::new(graph, d, mats)
    }
}

/// JSON form: edge list with row-major `[re, im]` entries per matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionDoc {
    pub d: usize,
    pub edges: Vec<[Label; 2]>,
    pub matrices: Vec<Vec<[f64; 2]>>,
}

/// A unitary per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeField {
    d: usize,
    mats: Vec<Mat>,
}

impl GaugeField {
    pub fn new(d: usize, mats: Vec<Mat>) -> Result<Self> {
        for m in &mats {
            let defect = unitary::unitary_defect(m);
            if defect > UNITARY_TOL {
                return Err(Error::NotUnitary(defect));
            }
        }
        Ok(Self { d, mats })
    }

    pub fn identity(graph: &Graph, d: usize) -> Self {
        Self { d, mats: vec![identity(d); graph.vertex_count()] }
    }

    pub fn haar<R: Rng + ?Sized>(graph: &Graph, d: usize, rng: &mut R) -> Self {
        Self { d, mats: (0..graph.vertex_count()).map(|_| unitary::haar_sample(d, rng)).collect() }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self, x: Vertex) -> &Mat {
        &self.mats[x as usize]
    }

    pub fn set_matrix(&mut self, x: Vertex, m: Mat) {
        self.mats[x as usize] = m;
    }

    /// Pointwise product `(self * other)(x) = self(x) other(x)`.
    pub fn product(&self, other: &GaugeField) -> GaugeField {
        GaugeField { d: self.d, mats: self.mats.iter().zip(&other.mats).map(|(a, b)| a * b).collect() }
    }

    /// `Tr(g(x_{p-1}) ... g(x_0))` for one discrete loop.
    pub fn trace(&self, l: &Loop) -> Result<Complex64> {
        let mut h = identity(self.d);
        for &x in l.cycle() {
            let g = self.mats.get(x as usize).ok_or(Error::GraphMismatch)?;
            h = g * h;
        }
        Ok(h.trace())
    }

    /// `T_g(c) = prod Tr(prod_i g(x_i))` with multiplicity.
    pub fn t_gauge(&self, c: &LoopCollection) -> Result<Complex64> {
        let mut acc = Complex64::new(1.0, 0.0);
        for (l, m) in c.entries() {
            acc *= self.trace(l)?.powu(*m);
        }
        Ok(acc)
    }
}

/// Independent heat-kernel increments on every edge: `m_e <- u_t m_e`.
pub fn heat_connection_sample<R: Rng + ?Sized>(m0: &Connection, t: f64, steps: usize, rng: &mut R) -> Connection {
    let mut out = m0.clone();
    for m in out.mats.iter_mut() {
        *m = unitary::heat_sample(m, t, steps, rng);
    }
    out
}

/// As [`heat_connection_sample`] but only on the listed edges; the law of
/// traces of loops supported there is unchanged.
pub fn heat_connection_sample_on<R: Rng + ?Sized>(
    m0: &Connection,
    edges: &[EdgeId],
    t: f64,
    steps: usize,
    rng: &mut R,
) -> Connection {
    let mut out = m0.clone();
    for &e in edges {
        out.mats[e as usize] = unitary::heat_sample(&out.mats[e as usize], t, steps, rng);
    }
    out
}

/// `P(A) = sum over plaquettes of Tr h(eta)`, both orientations.
pub fn plaquette_sum(m: &Connection, plaquettes: &PlaquetteIndex) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for p in &plaquettes.plaquettes {
        acc += m.trace(p)?;
    }
    Ok(acc)
}

/// Left-hand side of the intertwining identities.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Connection(&'a Connection),
    Gauge(&'a GaugeField),
}

/// Finite-difference Casimir of `tau` (connection target, summed over edges)
/// or of `T` (gauge target, summed over vertices).
pub fn casimir_fd_field(target: Target<'_>, c: &LoopCollection, eps: f64) -> Result<Complex64> {
    match target {
        Target::Connection(m) => {
            let mut acc = Complex64::new(0.0, 0.0);
            for e in m.support(c)? {
                let tau_at = |h: &Mat| m.with_edge(e, h).tau(c).expect("support edges are valid");
                acc += fd_casimir(tau_at, m.matrix(e), eps);
            }
            Ok(acc)
        }
        Target::Gauge(field) => {
            let mut vertices: Vec<Vertex> = c.copies().flat_map(|l| l.cycle().iter().copied()).collect();
            vertices.sort_unstable();
            vertices.dedup();
            let mut acc = Complex64::new(0.0, 0.0);
            for x in vertices {
                if x as usize >= field.mats.len() {
                    return Err(Error::GraphMismatch);
                }
                let t_at = |h: &Mat| {
                    let mut f = field.clone();
                    f.mats[x as usize] = h.clone();
                    f.t_gauge(c).expect("vertices checked")
                };
                acc += fd_casimir(t_at, field.matrix(x), eps);
            }
            Ok(acc)
        }
    }
}

/// Finite-difference `[A + (k/d) Gamma(P, .)] tau` on a torus.
pub fn deformed_casimir_fd(
    m: &Connection,
    c: &LoopCollection,
    k: f64,
    plaquettes: &PlaquetteIndex,
    eps: f64,
) -> Result<Complex64> {
    let base = casimir_fd_field(Target::Connection(m), c, eps)?;
    let mut gamma = Complex64::new(0.0, 0.0);
    for e in m.support(c)? {
        let p_at = |h: &Mat| plaquette_sum(&m.with_edge(e, h), plaquettes).expect("torus connection");
        let tau_at = |h: &Mat| m.with_edge(e, h).tau(c).expect("support edges are valid");
        gamma += fd_gamma(p_at, tau_at, m.matrix(e), eps);
    }
    Ok(base + k / m.d as f64 * gamma)
}

/// `A tau` assembled from an expansion of `-A tau`.
fn evaluate_expansion<F>(ex: &GeneratorExpansion, d: usize, eval: F) -> Result<Complex64>
where
    F: Fn(&LoopCollection) -> Result<Complex64>,
{
    Ok(-evaluate_negative(ex, d, eval)?)
}

fn evaluate_negative<F>(ex: &GeneratorExpansion, d: usize, eval: F) -> Result<Complex64>
where
    F: Fn(&LoopCollection) -> Result<Complex64>,
{
    Ok(ex.terms.iter().try_fold(Complex64::new(0.0, 0.0), |acc, term| {
        Ok::<_, Error>(acc + ex.weight(term, d) * eval(&term.collection)?)
    })?)
}

/// Right-hand side: the split/merge side of the identities, evaluated by
/// enumeration. For connections, `deformation = Some((k, plaquettes))` adds
/// the plaquette-merge terms.
pub fn casimir_rhs(
    target: Target<'_>,
    c: &LoopCollection,
    deformation: Option<(f64, &PlaquetteIndex)>,
) -> Result<Complex64> {
    match target {
        Target::Connection(m) => {
            let def = deformation.map(|(k, plaquettes)| Deformation { k, plaquettes, graph: m.graph() });
            let ex = generator_expansion(c, def)?;
            let diag = (m.d * ex.p_total) as f64 * m.tau(c)?;
            evaluate_expansion(&ex, m.d, |cc| m.tau(cc)).map(|v| v - diag)
        }
        Target::Gauge(g) => {
            let ex = vertex_expansion(c);
            let diag = (g.d * ex.p_total) as f64 * g.t_gauge(c)?;
            evaluate_expansion(&ex, g.d, |cc| g.t_gauge(cc)).map(|v| v - diag)
        }
    }
}

/// Checks that a loop collection lives on `m`'s graph.
pub fn check_collection(m: &Connection, graph: &Graph, c: &LoopCollection) -> Result<()> {
    if !m.same_graph(graph) {
        return Err(Error::GraphMismatch);
    }
    c.validate(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_discrete_collection, random_geodesic_collection};
    use crate::unitary::{expm_unchecked, haar_sample, lie_basis, relative_error, DEFAULT_EPS};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> Loop {
        Loop::from_cycle(vec![0, 1, 2])
    }

    #[test]
    fn tau_conventions() {
        let g = Arc::new(Graph::cycle(3).unwrap());
        let m = Connection::trivial(g.clone(), 2);
        assert_eq!(m.tau(&LoopCollection::single(triangle())).unwrap(), Complex64::from(2.0));
        assert_eq!(m.tau(&LoopCollection::single(Loop::trivial())).unwrap(), Complex64::from(2.0));
        assert_eq!(m.tau(&LoopCollection::new()).unwrap(), Complex64::from(1.0));

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = Connection::haar(g, 3, &mut rng);
        let t = m.trace(&triangle()).unwrap();
        let r = m.trace(&triangle().reversed()).unwrap();
        assert!((t - r.conj()).norm() < 1e-12);
        let c = LoopCollection::from_loops([triangle(), triangle(), triangle().reversed()]);
        assert!(m.tau(&c).unwrap().norm() <= 27.0 + 1e-9);
    }

    #[test]
    fn one_form_holonomy() {
        let g = Arc::new(Graph::complete(4).unwrap());
        let omega: Vec<f64> = (0..g.edge_count()).map(|i| 0.3 + 0.7 * i as f64).collect();
        let mats = omega.iter().map(|&w| Mat::from_element(1, 1, Complex64::from_polar(1.0, w))).collect();
        let m = Connection::new(g.clone(), 1, mats).unwrap();
        let l = Loop::from_cycle(vec![0, 1, 2, 3, 1, 0, 2, 3]);
        let diffs = crate::loops::occupation(&g, &LoopCollection::single(l.clone())).differences();
        let phase: f64 = omega.iter().zip(&diffs).map(|(w, n)| w * *n as f64).sum();
        assert!((m.trace(&l).unwrap() - Complex64::from_polar(1.0, phase)).norm() < 1e-12);
    }

    #[test]
    fn gauge_invariance_and_composition() {
        let g = Arc::new(Graph::torus(3, 2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..20 {
            let m = Connection::haar(g.clone(), 2, &mut rng);
            let h1 = GaugeField::haar(&g, 2, &mut rng);
            let h2 = GaugeField::haar(&g, 2, &mut rng);
            let c = random_geodesic_collection(&g, &mut rng, 3, 16);
            let m1 = m.gauge_transform(&h1).unwrap();
            assert!((m.tau(&c).unwrap() - m1.tau(&c).unwrap()).norm() < 1e-10);
            let twice = m1.gauge_transform(&h2).unwrap();
            let once = m.gauge_transform(&h1.product(&h2)).unwrap();
            for (a, b) in twice.matrices().iter().zip(once.matrices()) {
                assert!((a - b).iter().all(|z| z.norm() < 1e-12));
            }
        }
        let m = Connection::haar(g.clone(), 2, &mut rng);
        assert_eq!(m.gauge_transform(&GaugeField::identity(&g, 2)).unwrap(), m);
    }

    #[test]
    fn tree_gauge_fixing() {
        let g = Arc::new(Graph::torus(3, 2).unwrap());
        let tree = g.spanning_tree(0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let m = Connection::haar(g.clone(), 2, &mut rng);
        let (fixed, _) = m.tree_gauge_fix(&tree).unwrap();
        assert_eq!(fixed.non_identity_edges(1e-12).len(), 10);
        for _ in 0..20 {
            let c = random_geodesic_collection(&g, &mut rng, 3, 16);
            assert!((m.tau(&c).unwrap() - fixed.tau(&c).unwrap()).norm() < 1e-10);
        }
        let (again, field) = fixed.tree_gauge_fix(&tree).unwrap();
        assert!(field.mats.iter().all(|x| (x - identity(2)).iter().all(|z| z.norm() < 1e-12)));
        assert!(again.matrices().iter().zip(fixed.matrices()).all(|(a, b)| (a - b).iter().all(|z| z.norm() < 1e-12)));
        let other = Graph::torus(4, 2).unwrap().spanning_tree(0).unwrap();
        assert_eq!(m.tree_gauge_fix(&other), Err(Error::TreeMismatch));
    }

    #[test]
    fn lie_derivative_matches_finite_difference() {
        let g = Arc::new(Graph::complete(4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for d in 1..=3 {
            let basis = lie_basis(d);
            for _ in 0..10 {
                let m = Connection::haar(g.clone(), d, &mut rng);
                let c = random_geodesic_collection(&g, &mut rng, 3, 12);
                for e in m.support(&c).unwrap() {
                    let w = &basis[rng.random_range(0..basis.len())];
                    let exact = m.lie_derivative_exact(&c, e, w).unwrap();
                    let h = 1e-5;
                    let mut mp = m.clone();
                    mp.mats[e as usize] = expm_unchecked(w, h) * m.matrix(e);
                    let mut mm = m.clone();
                    mm.mats[e as usize] = expm_unchecked(w, -h) * m.matrix(e);
                    let fd = (mp.tau(&c).unwrap() - mm.tau(&c).unwrap()) / (2.0 * h);
                    assert!(relative_error(fd, exact) < 1e-7, "{fd} vs {exact}");
                }
            }
        }
        // d = 1: derivative = i (N_xy - N_yx) tau
        let m = Connection::haar(g.clone(), 1, &mut rng);
        let l = Loop::from_cycle(vec![0, 1, 2, 0, 1, 3]);
        let c = LoopCollection::single(l);
        let (e, _) = g.edge_between(0, 1).unwrap();
        let exact = m.lie_derivative_exact(&c, e, &lie_basis(1)[0]).unwrap();
        let expect = Complex64::new(0.0, 2.0) * m.tau(&c).unwrap();
        assert!((exact - expect).norm() < 1e-12);
    }

    #[test]
    fn casimir_examples() {
        let g = Arc::new(Graph::cycle(3).unwrap());
        let m = Connection::trivial(g.clone(), 2);
        let c = LoopCollection::single(triangle());
        let fd = casimir_fd_field(Target::Connection(&m), &c, DEFAULT_EPS).unwrap();
        assert!((fd - Complex64::from(-12.0)).norm() < 1e-4);
        assert_eq!(casimir_rhs(Target::Connection(&m), &c, None).unwrap(), Complex64::from(-12.0));

        let both = LoopCollection::from_loops([triangle(), triangle().reversed()]);
        assert_eq!(casimir_rhs(Target::Connection(&m), &both, None).unwrap(), Complex64::from(-36.0));
        let fd = casimir_fd_field(Target::Connection(&m), &both, DEFAULT_EPS).unwrap();
        assert!((fd - Complex64::from(-36.0)).norm() < 1e-4);

        let field = GaugeField::identity(&g, 2);
        let fd = casimir_fd_field(Target::Gauge(&field), &c, DEFAULT_EPS).unwrap();
        assert!((fd - Complex64::from(-12.0)).norm() < 1e-4);
        assert_eq!(casimir_rhs(Target::Gauge(&field), &c, None).unwrap(), Complex64::from(-12.0));

        let t = Arc::new(Graph::torus(3, 2).unwrap());
        let idx = PlaquetteIndex::new(&t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let m = Connection::haar(t, 2, &mut rng);
        let p = LoopCollection::single(idx.plaquettes[5].clone());
        let fd = casimir_fd_field(Target::Connection(&m), &p, DEFAULT_EPS).unwrap();
        let expect = -8.0 * m.tau(&p).unwrap();
        assert!(relative_error(fd, expect) < 1e-4);
    }

    #[test]
    fn intertwining_on_small_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for graph in [Graph::cycle(3).unwrap(), Graph::complete(4).unwrap(), Graph::torus(3, 2).unwrap()] {
            let g = Arc::new(graph);
            for d in 1..=3 {
                for _ in 0..5 {
                    let m = Connection::haar(g.clone(), d, &mut rng);
                    let c = random_geodesic_collection(&g, &mut rng, 3, 14);
                    let fd = casimir_fd_field(Target::Connection(&m), &c, DEFAULT_EPS).unwrap();
                    let rhs = casimir_rhs(Target::Connection(&m), &c, None).unwrap();
                    assert!(relative_error(fd, rhs) < 1e-4, "d={d} {c:?}: {fd} vs {rhs}");

                    let field = GaugeField::haar(&g, d, &mut rng);
                    let c = random_discrete_collection(&g, &mut rng, 3, 12);
                    let fd = casimir_fd_field(Target::Gauge(&field), &c, DEFAULT_EPS).unwrap();
                    let rhs = casimir_rhs(Target::Gauge(&field), &c, None).unwrap();
                    assert!(relative_error(fd, rhs) < 1e-4, "gauge d={d} {c:?}: {fd} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn deformed_intertwining() {
        let g = Arc::new(Graph::torus(3, 2).unwrap());
        let idx = PlaquetteIndex::new(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for k in [0.5, 1.0] {
            for _ in 0..5 {
                let m = Connection::haar(g.clone(), 2, &mut rng);
                let c = random_geodesic_collection(&g, &mut rng, 2, 10);
                let fd = deformed_casimir_fd(&m, &c, k, &idx, DEFAULT_EPS).unwrap();
                let rhs = casimir_rhs(Target::Connection(&m), &c, Some((k, &idx))).unwrap();
                assert!(relative_error(fd, rhs) < 1e-4, "{fd} vs {rhs}");
            }
        }
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let g = Arc::new(Graph::cycle(3).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let m = Connection::haar(g.clone(), 2, &mut rng);
        let text = serde_json::to_string(&m.to_doc()).unwrap();
        let doc: ConnectionDoc = serde_json::from_str(&text).unwrap();
        let back = Connection::from_doc(g.clone(), &doc).unwrap();
        for (a, b) in back.matrices().iter().zip(m.matrices()) {
            assert!((a - b).iter().all(|z| z.norm() < 1e-15));
        }
        let mut bad = doc.clone();
        bad.matrices[0][0] = [2.0, 0.0];
        assert!(matches!(Connection::from_doc(g, &bad), Err(Error::NotUnitary(_))));
        let _ = haar_sample(1, &mut rng);
    }

    #[test]
    fn heat_sampler_plaquette_mean() {
        let g = Arc::new(Graph::torus(3, 2).unwrap());
        let idx = PlaquetteIndex::new(&g).unwrap();
        let m0 = Connection::trivial(g.clone(), 2);
        let p = LoopCollection::single(idx.plaquettes[0].clone());
        let support = m0.support(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let t = 0.1;
        let n = 10_000;
        let vals: Vec<f64> = (0..n)
            .map(|_| heat_connection_sample_on(&m0, &support, t, 20, &mut rng).tau(&p).unwrap().re)
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let expect = 2.0 * (-0.8f64).exp();
        assert!((mean - expect).abs() < 4.0 * (var / n as f64).sqrt() + 2e-3, "{mean} vs {expect}");
        assert_eq!(heat_connection_sample(&m0, 0.0, 0, &mut rng), m0);
    }
}
