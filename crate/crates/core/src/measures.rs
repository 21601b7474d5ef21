//! Yang-Mills weights and samplers on the discrete torus, the drifted
//! diffusion, signed Feynman-Kac estimators and Schwinger-Dyson residuals.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::connection::{heat_connection_sample_on, plaquette_sum, Connection};
use crate::error::{Error, Result};
use crate::exec::{map_trials, trial_rng};
use crate::loops::{Loop, LoopCollection};
use crate::splitmerge::{generator_expansion, ChainContext, ChainMode, Deformation, Diagonal, RateSummary};
use crate::stats::Estimate;
use crate::topology::{EdgeId, Graph, PlaquetteIndex, Vertex};
use crate::unitary::{self, expm_unchecked, random_algebra, Mat};

/// Yang-Mills measure on the torus `(Z/L)^n` with `U(d)` and coupling `k`.
#[derive(Debug, Clone)]
pub struct YangMillsConfig {
    graph: Arc<Graph>,
    d: usize,
    k: f64,
    plaquettes: Arc<PlaquetteIndex>,
}

impl YangMillsConfig {
    pub fn new(side: usize, dim: usize, d: usize, k: f64) -> Result<Self> {
        Self::from_graph(Arc::new(Graph::torus(side, dim)?), d, k)
    }

    pub fn from_graph(graph: Arc<Graph>, d: usize, k: f64) -> Result<Self> {
        if k < 0.0 || !k.is_finite() {
            return Err(Error::Config(format!("coupling must be non-negative, got {k}")));
        }
        let plaquettes = Arc::new(PlaquetteIndex::new(&graph)?);
        Ok(Self { graph, d, k, plaquettes })
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn plaquettes(&self) -> &PlaquetteIndex {
        &self.plaquettes
    }

    pub fn with_k(&self, k: f64) -> Self {
        Self { k, ..self.clone() }
    }

    fn fwd(&self, e: EdgeId) -> usize {
        2 * e as usize
    }
}

/// `P(A)`, real up to rounding since both orientations are summed.
pub fn plaquette_action(m: &Connection, cfg: &YangMillsConfig) -> Result<f64> {
    let p = plaquette_sum(m, &cfg.plaquettes)?;
    if p.im.abs() > 1e-8 {
        return Err(Error::ImaginaryResidue(p.im.abs()));
    }
    Ok(p.re)
}

/// `(k/d) (P(A) - d |plaquettes|)`.
pub fn ym_log_weight(m: &Connection, cfg: &YangMillsConfig) -> Result<f64> {
    let p = plaquette_action(m, cfg)?;
    let d = cfg.d as f64;
    Ok(cfg.k / d * (p - d * cfg.plaquettes.len() as f64))
}

/// `-k sum_eta (1 - Tr h(eta) / d)`.
pub fn ym_log_weight_sum_form(m: &Connection, cfg: &YangMillsConfig) -> Result<f64> {
    let d = cfg.d as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in &cfg.plaquettes.plaquettes {
        acc += 1.0 - m.trace(p)? / d;
    }
    if acc.im.abs() > 1e-8 {
        return Err(Error::ImaginaryResidue(acc.im.abs()));
    }
    Ok(-cfg.k * acc.re)
}

/// Staple sum `A_e` with `sum over plaquettes crossing (u, v) of Tr h = Tr(m_e A_e)`,
/// where `(u, v)` is the positive orientation of `e`.
pub fn staple_sum(m: &Connection, cfg: &YangMillsConfig, e: EdgeId) -> Mat {
    let mut acc = Mat::zeros(cfg.d, cfg.d);
    for &(p, pos) in cfg.plaquettes.through(cfg.fwd(e)) {
        let c = cfg.plaquettes.plaquettes[p].rotated(pos);
        let m1 = m.oriented(c[1], c[2]).expect("plaquette edge");
        let m2 = m.oriented(c[2], c[3]).expect("plaquette edge");
        let m3 = m.oriented(c[3], c[0]).expect("plaquette edge");
        acc += m3 * m2 * m1;
    }
    acc
}

/// `sum_l b_l W_l` with `b_l` the Lie derivative of `P` at `e` along `W_l`;
/// equals `K* - K` for `K = m_e A_e`.
pub fn langevin_drift(m: &Connection, cfg: &YangMillsConfig, e: EdgeId) -> Mat {
    let k = m.matrix(e) * staple_sum(m, cfg, e);
    k.adjoint() - k
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetropolisOptions {
    pub proposal_scale: f64,
    pub burn_in_fraction: f64,
    /// Full sweeps (one proposal per edge on average) between retained samples.
    pub thinning_sweeps: usize,
}

impl Default for MetropolisOptions {
    fn default() -> Self {
        Self { proposal_scale: 0.3, burn_in_fraction: 0.2, thinning_sweeps: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct MetropolisRun {
    pub samples: Vec<Connection>,
    /// Acceptance rate after burn-in.
    pub acceptance: f64,
}

/// Single-edge Metropolis for the Yang-Mills density, retaining `retained`
/// thinned samples after burn-in.
pub fn metropolis_chain<R: Rng + ?Sized>(
    cfg: &YangMillsConfig,
    m0: Connection,
    retained: usize,
    opts: &MetropolisOptions,
    rng: &mut R,
) -> MetropolisRun {
    let edges = cfg.graph.edge_count();
    let production = retained * opts.thinning_sweeps * edges;
    let burn = (production as f64 * opts.burn_in_fraction / (1.0 - opts.burn_in_fraction)).round() as usize;
    let scale = opts.proposal_scale.sqrt();
    let coupling = cfg.k / cfg.d as f64;
    let mut m = m0;
    let mut samples = Vec::with_capacity(retained);
    let mut accepted = 0usize;
    let per_sample = opts.thinning_sweeps * edges;
    for step in 0..burn + production {
        let e = rng.random_range(0..edges) as EdgeId;
        let proposal = expm_unchecked(&random_algebra(cfg.d, scale, rng), 1.0) * m.matrix(e);
        let a = staple_sum(&m, cfg, e);
        let delta_p = 2.0 * ((&proposal - m.matrix(e)) * a).trace().re;
        let log_ratio = coupling * delta_p;
        if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
            m.set_matrix(e, proposal);
            if step >= burn {
                accepted += 1;
            }
        }
        if step >= burn && (step - burn + 1) % per_sample == 0 {
            for e in 0..edges as EdgeId {
                if unitary::unitary_defect(m.matrix(e)) > 1e-10 {
                    let fixed = unitary::reunitarize(m.matrix(e));
                    m.set_matrix(e, fixed);
                }
            }
            samples.push(m.clone());
        }
    }
    MetropolisRun { samples, acceptance: accepted as f64 / production.max(1) as f64 }
}

/// One Langevin step of size `delta` on every edge, in edge order.
pub fn langevin_step<R: Rng + ?Sized>(cfg: &YangMillsConfig, m: &mut Connection, delta: f64, rng: &mut R) {
    let noise = (2.0 * delta).sqrt();
    let coupling = delta * cfg.k / cfg.d as f64;
    for e in 0..cfg.graph.edge_count() as EdgeId {
        let mut x = random_algebra(cfg.d, noise, rng);
        if coupling != 0.0 {
            x += langevin_drift(m, cfg, e) * Complex64::from(coupling);
        }
        let next = expm_unchecked(&x, 1.0) * m.matrix(e);
        m.set_matrix(e, next);
    }
}

/// Drifted diffusion with generator `A + (k/d) Gamma(P, .)` run for time `t`.
pub fn langevin_chain<R: Rng + ?Sized>(
    cfg: &YangMillsConfig,
    m0: &Connection,
    t: f64,
    delta: f64,
    rng: &mut R,
) -> Connection {
    let mut m = m0.clone();
    let steps = (t / delta).ceil() as usize;
    if steps == 0 {
        return m;
    }
    let dt = t / steps as f64;
    for step in 1..=steps {
        langevin_step(cfg, &mut m, dt, rng);
        if step % 256 == 0 || step == steps {
            reunitarize_all(&mut m);
        }
    }
    m
}

fn reunitarize_all(m: &mut Connection) {
    for e in 0..m.graph().edge_count() as EdgeId {
        if unitary::unitary_defect(m.matrix(e)) > 1e-10 {
            let fixed = unitary::reunitarize(m.matrix(e));
            m.set_matrix(e, fixed);
        }
    }
}

/// Mean of `Re Tr h` over all plaquettes.
pub fn mean_plaquette_trace(m: &Connection, cfg: &YangMillsConfig) -> Result<f64> {
    Ok(plaquette_action(m, cfg)? / cfg.plaquettes.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FkMode {
    SmPlusMinus,
    SmPlusOnly,
    Smd { k: f64 },
}

/// Potential and sign bookkeeping of the Feynman-Kac weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PotentialConvention {
    /// `-(d-1) S + R`, sign flipped on every positive firing.
    SignEveryFiring,
    /// Diagonal positive firings removed: rate `N(N-1)`, potential `-d S + R`.
    PrunedDiagonal,
    /// `-(d-1) S + 2 V-` (deformed: `(2(k/d)(n-1) - d + 1) S + 2 V-`), as printed
    /// in the literature; kept for comparison.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FkEstimate {
    pub mean: Complex64,
    pub stderr: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub trials: usize,
    pub mode: FkMode,
    pub potential: PotentialConvention,
}

/// Everything a Feynman-Kac run needs besides the random stream.
#[derive(Debug, Clone, Copy)]
pub struct FkSetup<'a> {
    pub m0: &'a Connection,
    pub c0: &'a LoopCollection,
    pub t: f64,
    pub mode: FkMode,
    pub potential: PotentialConvention,
    pub plaquettes: Option<&'a PlaquetteIndex>,
}

impl<'a> FkSetup<'a> {
    pub fn new(m0: &'a Connection, c0: &'a LoopCollection, t: f64, mode: FkMode) -> Self {
        Self { m0, c0, t, mode, potential: PotentialConvention::PrunedDiagonal, plaquettes: None }
    }

    pub fn potential(mut self, p: PotentialConvention) -> Self {
        self.potential = p;
        self
    }

    pub fn plaquettes(mut self, p: &'a PlaquetteIndex) -> Self {
        self.plaquettes = Some(p);
        self
    }

    fn context(&self) -> Result<ChainContext<'a>> {
        let graph = self.m0.graph();
        let mode = match self.mode {
            FkMode::SmPlusMinus => ChainMode::SmPlusMinus,
            FkMode::SmPlusOnly => ChainMode::SmPlus,
            FkMode::Smd { k } => ChainMode::Smd { k },
        };
        let diagonal = match self.potential {
            PotentialConvention::PrunedDiagonal => Diagonal::Pruned,
            _ => Diagonal::Literal,
        };
        let mut ctx = ChainContext::new(graph, self.m0.d(), mode).with_diagonal(diagonal);
        if let FkMode::Smd { .. } = self.mode {
            let p = self.plaquettes.ok_or_else(|| Error::Config("deformed mode needs a torus plaquette index".into()))?;
            ctx = ctx.with_plaquettes(p);
        }
        Ok(ctx)
    }

    fn potential_fn(&self) -> impl Fn(&RateSummary) -> f64 {
        let d = self.m0.d() as f64;
        let convention = self.potential;
        let printed_s = match (self.mode, self.plaquettes) {
            (FkMode::Smd { k }, Some(p)) => 2.0 * k / d * (p.dim() as f64 - 1.0) - d + 1.0,
            _ => -(d - 1.0),
        };
        move |r: &RateSummary| match convention {
            PotentialConvention::SignEveryFiring => -(d - 1.0) * r.s as f64 + r.total,
            PotentialConvention::PrunedDiagonal => -d * r.s as f64 + r.total,
            PotentialConvention::Printed => printed_s * r.s as f64 + 2.0 * r.v_minus as f64,
        }
    }

    /// One trajectory's weight `(-1)^{m+} exp(int a) tau(m0, L_t)`.
    pub fn weight<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Complex64> {
        let ctx = self.context()?;
        let a = self.potential_fn();
        let traj = ctx.trajectory(self.c0, self.t, a, rng)?;
        let sign = if traj.positive_firings % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign * traj.integral.exp() * self.m0.tau_of_loops(&traj.final_state)?)
    }

    /// Monte Carlo estimate over `trials` trajectories seeded from `master_seed`.
    pub fn estimate(&self, trials: usize, master_seed: u64) -> Result<FkEstimate> {
        self.context()?;
        for l in self.c0.copies() {
            if !l.is_trivial() && !l.is_geodesic() {
                return Err(Error::NotGeodesic);
            }
        }
        let weights: Vec<Result<Complex64>> =
            map_trials(trials, |i| self.weight(&mut trial_rng(master_seed, i as u64)));
        let weights = weights.into_iter().collect::<Result<Vec<_>>>()?;
        let est = Estimate::from_samples(&weights);
        Ok(FkEstimate {
            mean: est.mean,
            stderr: est.stderr(),
            stderr_re: est.stderr_re,
            stderr_im: est.stderr_im,
            trials,
            mode: self.mode,
            potential: self.potential,
        })
    }
}

/// Feynman-Kac estimate of `E[tau(m_t, c0)]` under the (deformed) heat semigroup.
#[allow(clippy::too_many_arguments)]
pub fn fk_estimator(
    c0: &LoopCollection,
    m0: &Connection,
    t: f64,
    mode: FkMode,
    potential: PotentialConvention,
    trials: usize,
    plaquettes: Option<&PlaquetteIndex>,
    master_seed: u64,
) -> Result<FkEstimate> {
    let mut setup = FkSetup::new(m0, c0, t, mode).potential(potential);
    if let Some(p) = plaquettes {
        setup = setup.plaquettes(p);
    }
    setup.estimate(trials, master_seed)
}

/// Direct estimate of `E[tau(m_t, c0)]` by heat-kernel sampling of the edges
/// crossed by `c0`.
pub fn heat_direct_estimate(
    c0: &LoopCollection,
    m0: &Connection,
    t: f64,
    steps: usize,
    trials: usize,
    master_seed: u64,
) -> Result<Estimate> {
    let support = m0.support(c0)?;
    let values = map_trials(trials, |i| {
        let mut rng = trial_rng(master_seed, i as u64);
        heat_connection_sample_on(m0, &support, t, steps, &mut rng).tau(c0)
    });
    Ok(Estimate::from_samples(&values.into_iter().collect::<Result<Vec<_>>>()?))
}

/// Vertex permutations generated by translations and axis permutations of a torus.
pub fn torus_symmetries(graph: &Graph) -> Result<Vec<Vec<Vertex>>> {
    let (side, dim) = graph.torus_shape().ok_or(Error::NotATorus)?;
    let mut perms = vec![Vec::new()];
    for _ in 0..dim {
        let mut next = Vec::new();
        for p in &perms {
            for a in 0..dim {
                if !p.contains(&a) {
                    let mut q = p.clone();
                    q.push(a);
                    next.push(q);
                }
            }
        }
        perms = next;
    }
    let n = graph.vertex_count();
    let coords: Vec<Vec<i64>> = (0..n as Vertex).map(|v| graph.coords(v).expect("torus vertex")).collect();
    let index = |c: &[i64]| c.iter().fold(0usize, |acc, &x| acc * side + x.rem_euclid(side as i64) as usize) as Vertex;
    let mut out = Vec::with_capacity(n * perms.len());
    for shift in &coords {
        for p in &perms {
            let map = coords
                .iter()
                .map(|c| {
                    let image: Vec<i64> = (0..dim).map(|i| c[p[i]] + shift[i]).collect();
                    index(&image)
                })
                .collect();
            out.push(map);
        }
    }
    Ok(out)
}

/// Images of a collection under a list of vertex permutations.
pub fn orbit(c: &LoopCollection, symmetries: &[Vec<Vertex>]) -> Vec<LoopCollection> {
    symmetries
        .iter()
        .map(|s| {
            let mut out = LoopCollection::new();
            for (l, m) in c.entries() {
                out.add(Loop::from_cycle(l.cycle().iter().map(|&v| s[v as usize]).collect()), *m);
            }
            out
        })
        .collect()
}

/// Split/merge side of the Casimir identity, enumerated once and evaluated
/// on many connections.
#[derive(Debug, Clone)]
pub struct PreparedRhs {
    diagonal: f64,
    base: LoopCollection,
    terms: Vec<(f64, LoopCollection)>,
}

impl PreparedRhs {
    pub fn new(
        c: &LoopCollection,
        d: usize,
        graph: &Graph,
        deformation: Option<(f64, &PlaquetteIndex)>,
    ) -> Result<Self> {
        let def = deformation.map(|(k, plaquettes)| Deformation { k, plaquettes, graph });
        let ex = generator_expansion(c, def)?;
        let terms = ex.terms.iter().map(|t| (ex.weight(t, d), t.collection.clone())).collect();
        Ok(Self { diagonal: (d * ex.p_total) as f64, base: c.clone(), terms })
    }

    /// `A tau` (plus the deformation) at connection `m`.
    pub fn eval(&self, m: &Connection) -> Result<Complex64> {
        let mut acc = self.diagonal * m.tau(&self.base)?;
        for (w, c) in &self.terms {
            acc += *w * m.tau(c)?;
        }
        Ok(-acc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SdMeasure {
    Haar,
    YangMills { k: f64 },
}

/// Residual sampler options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdOptions {
    /// Average each sample over the torus symmetry orbit of the collection.
    pub orbit: bool,
    /// Independent Markov chains for the Yang-Mills measure.
    pub chains: usize,
    pub metropolis: MetropolisOptions,
}

impl Default for SdOptions {
    fn default() -> Self {
        Self { orbit: true, chains: 20, metropolis: MetropolisOptions::default() }
    }
}

/// Prepared residual evaluators for a collection and its symmetry images.
pub fn prepare_residual(
    graph: &Graph,
    d: usize,
    c: &LoopCollection,
    deformation: Option<(f64, &PlaquetteIndex)>,
    orbit_average: bool,
) -> Result<Vec<PreparedRhs>> {
    let images = if orbit_average && graph.torus_shape().is_some() {
        orbit(c, &torus_symmetries(graph)?)
    } else {
        vec![c.clone()]
    };
    images.iter().map(|img| PreparedRhs::new(img, d, graph, deformation)).collect()
}

fn residual_value(prepared: &[PreparedRhs], m: &Connection) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for p in prepared {
        acc += p.eval(m)?;
    }
    Ok(acc / prepared.len() as f64)
}

/// Monte Carlo mean of the (deformed) Casimir right-hand side under Haar or
/// Yang-Mills measure; the Schwinger-Dyson equations predict zero.
pub fn sd_residual(
    graph: &Arc<Graph>,
    d: usize,
    c: &LoopCollection,
    measure: SdMeasure,
    samples: usize,
    opts: &SdOptions,
    master_seed: u64,
) -> Result<Estimate> {
    for l in c.copies() {
        if !l.is_trivial() && !l.is_geodesic() {
            return Err(Error::NotGeodesic);
        }
    }
    c.validate(graph)?;
    match measure {
        SdMeasure::Haar => {
            let prepared = prepare_residual(graph, d, c, None, opts.orbit)?;
            let values = map_trials(samples, |i| {
                let mut rng = trial_rng(master_seed, i as u64);
                residual_value(&prepared, &Connection::haar(graph.clone(), d, &mut rng))
            });
            Ok(Estimate::from_samples(&values.into_iter().collect::<Result<Vec<_>>>()?))
        }
        SdMeasure::YangMills { k } => {
            let cfg = YangMillsConfig::from_graph(graph.clone(), d, k)?;
            let prepared = prepare_residual(graph, d, c, Some((k, cfg.plaquettes())), opts.orbit)?;
            let runs = ym_samples(&cfg, samples, opts, master_seed);
            residual_of_runs(&prepared, &runs)
        }
    }
}

/// Residual estimate over Metropolis runs; batch means with five batches per chain.
pub fn residual_of_runs(prepared: &[PreparedRhs], runs: &[MetropolisRun]) -> Result<Estimate> {
    let per_chain = runs.first().map_or(0, |r| r.samples.len());
    let values = map_trials(runs.len() * per_chain, |i| {
        residual_value(prepared, &runs[i / per_chain].samples[i % per_chain])
    });
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Estimate::from_batches(&values, 5 * runs.len()))
}

/// Independent Metropolis chains from the trivial connection with
/// `samples / chains` retained samples each.
pub fn ym_samples(cfg: &YangMillsConfig, samples: usize, opts: &SdOptions, master_seed: u64) -> Vec<MetropolisRun> {
    let chains = opts.chains.max(1);
    let per_chain = samples.div_ceil(chains);
    map_trials(chains, |i| {
        let mut rng = trial_rng(master_seed, i as u64);
        let m0 = Connection::trivial(cfg.graph.clone(), cfg.d);
        metropolis_chain(cfg, m0, per_chain, &opts.metropolis, &mut rng)
    })
}

/// Langevin estimate of the mean plaquette trace: `chains` independent runs
/// from the trivial connection, relaxed for `burn_in` and then recorded every
/// `spacing` for `records` observations. Chain means are the independent units.
pub fn langevin_plaquette_mean(
    cfg: &YangMillsConfig,
    chains: usize,
    burn_in: f64,
    spacing: f64,
    records: usize,
    delta: f64,
    master_seed: u64,
) -> Result<(f64, f64)> {
    let means = map_trials(chains, |i| {
        let mut rng = trial_rng(master_seed, i as u64);
        let mut m = langevin_chain(cfg, &Connection::trivial(cfg.graph.clone(), cfg.d), burn_in, delta, &mut rng);
        let mut acc = 0.0;
        for _ in 0..records {
            m = langevin_chain(cfg, &m, spacing, delta, &mut rng);
            acc += mean_plaquette_trace(&m, cfg)?;
        }
        Ok(acc / records as f64)
    });
    let means = means.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(crate::stats::mean_stderr(&means))
}

/// Metropolis estimate of the mean plaquette trace with chain means as
/// units, plus the mean acceptance rate.
pub fn plaquette_mean_of_runs(cfg: &YangMillsConfig, runs: &[MetropolisRun]) -> Result<(f64, f64, f64)> {
    let mut means = Vec::with_capacity(runs.len());
    let mut acceptance = 0.0;
    for r in runs {
        let vals = r.samples.iter().map(|m| mean_plaquette_trace(m, cfg)).collect::<Result<Vec<_>>>()?;
        means.push(crate::stats::pairwise_sum(&vals) / vals.len() as f64);
        acceptance += r.acceptance / runs.len() as f64;
    }
    let (mean, se) = crate::stats::mean_stderr(&means);
    Ok((mean, se, acceptance))
}
