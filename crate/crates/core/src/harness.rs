//! Verification suites, seeded execution and JSON reports.
//!
//! Every suite is a pure function of its [`SuiteConfig`] (thread count
//! excluded): trials draw from streams derived from the master seed and are
//! reduced in index order.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::connection::{
    casimir_fd_field, casimir_rhs, deformed_casimir_fd, heat_connection_sample, plaquette_sum, Connection,
    GaugeField, Target,
};
use crate::error::{Error, Result};
use crate::exec::{derive_trial_seed, map_trials, trial_rng, with_threads};
use crate::generate::{random_closed_walk, random_discrete_collection, random_geodesic_collection};
use crate::loops::{flow_of, markov_of_flow, occupation, winding, Loop, LoopCollection};
use crate::measures::{
    langevin_plaquette_mean, mean_plaquette_trace, plaquette_mean_of_runs, prepare_residual, residual_of_runs,
    ym_samples, FkMode, FkSetup, PotentialConvention, SdMeasure, SdOptions, YangMillsConfig,
};
use crate::splitmerge::{
    generator_expansion, merge_pos_all, split_pos_all, ChainContext, ChainMode, Deformation, Diagonal, TermClass,
};
use crate::stats::Estimate;
use crate::topology::{Graph, GraphSpec, PlaquetteIndex, Vertex};
use crate::unitary::{
    self, haar_sample, identity, lemma, lie_basis, relative_error, Mat, DEFAULT_DT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Sonia,
    Intertwine,
    GaugeIntertwine,
    DeformedIntertwine,
    HaarSd,
    HeatFk,
    FkFokkerPlanck,
    YmSd,
    Combinatorics,
    Adjudication,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Sonia,
        Suite::Intertwine,
        Suite::GaugeIntertwine,
        Suite::DeformedIntertwine,
        Suite::HaarSd,
        Suite::HeatFk,
        Suite::FkFokkerPlanck,
        Suite::YmSd,
        Suite::Combinatorics,
        Suite::Adjudication,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Sonia => "sonia",
            Suite::Intertwine => "intertwine",
            Suite::GaugeIntertwine => "gauge-intertwine",
            Suite::DeformedIntertwine => "deformed-intertwine",
            Suite::HaarSd => "haar-sd",
            Suite::HeatFk => "heat-fk",
            Suite::FkFokkerPlanck => "fk-fokker-planck",
            Suite::YmSd => "ym-sd",
            Suite::Combinatorics => "combinatorics",
            Suite::Adjudication => "adjudication",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite '{s}'")))
    }
}

/// Suite selection and parameters. Unset options take per-suite defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub suite: Suite,
    pub graph: Option<GraphSpec>,
    pub d: Vec<usize>,
    pub k: Vec<f64>,
    pub t: Option<f64>,
    pub trials: Option<usize>,
    pub eps: f64,
    /// Multiplier of the standard error in statistical gates.
    pub sigma: f64,
    /// Override for the tolerance of deterministic checks.
    pub tolerance: Option<f64>,
    pub seed: u64,
    #[serde(skip)]
    pub threads: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl SuiteConfig {
    pub fn new(suite: Suite) -> Self {
        Self {
            suite,
            graph: None,
            d: Vec::new(),
            k: Vec::new(),
            t: None,
            trials: None,
            eps: unitary::DEFAULT_EPS,
            sigma: 4.0,
            tolerance: None,
            seed: 42,
            threads: 0,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {x}")))
            }
        };
        positive("eps", self.eps)?;
        positive("sigma", self.sigma)?;
        if let Some(t) = self.tolerance {
            positive("tolerance", t)?;
        }
        if let Some(t) = self.t {
            positive("t", t)?;
        }
        if self.trials == Some(0) {
            return Err(Error::Config("trials must be positive".into()));
        }
        if self.d.iter().any(|&d| d == 0 || d > 8) {
            return Err(Error::Config("d must lie in 1..=8".into()));
        }
        if self.k.iter().any(|&k| !(k >= 0.0 && k.is_finite())) {
            return Err(Error::Config("k must be non-negative".into()));
        }
        if let Some(spec) = &self.graph {
            Graph::build(spec)?;
        }
        Ok(())
    }

    fn ds(&self, default: &[usize]) -> Vec<usize> {
        if self.d.is_empty() { default.to_vec() } else { self.d.clone() }
    }

    fn ks(&self, default: &[f64]) -> Vec<f64> {
        if self.k.is_empty() { default.to_vec() } else { self.k.clone() }
    }

    fn graphs(&self, default: &[GraphSpec]) -> Result<Vec<(String, Arc<Graph>)>> {
        let specs = match &self.graph {
            Some(s) => vec![s.clone()],
            None => default.to_vec(),
        };
        specs.iter().map(|s| Ok((graph_name(s), Arc::new(Graph::build(s)?)))).collect()
    }

    fn torus(&self, side: usize, n: usize) -> Result<(String, Arc<Graph>)> {
        let (name, g) = self.graphs(&[GraphSpec::Torus { side, n }])?.remove(0);
        if g.torus_shape().is_none() {
            return Err(Error::Config(format!("suite {} needs a torus graph", self.suite)));
        }
        Ok((name, g))
    }
}

fn graph_name(spec: &GraphSpec) -> String {
    match spec {
        GraphSpec::Torus { side, n } => format!("torus({side},{n})"),
        GraphSpec::Cycle { m } => format!("cycle({m})"),
        GraphSpec::Complete { m } => format!("complete({m})"),
        GraphSpec::Explicit { vertices, .. } => format!("explicit({})", vertices.len()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Value {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Value {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<Value> for Complex64 {
    fn from(v: Value) -> Self {
        Complex64::new(v.re, v.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub name: String,
    pub estimate: Value,
    pub stderr: f64,
    pub target: Value,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: u64,
    pub wall_ms: u64,
}

impl TestRecord {
    /// `|estimate - target| <= tolerance`, recomputed from the stored fields.
    pub fn recheck(&self) -> bool {
        let gap = (Complex64::from(self.estimate) - Complex64::from(self.target)).norm();
        gap <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub suite: String,
    pub config: SuiteConfig,
    pub tests: Vec<TestRecord>,
    pub pass: bool,
}

impl TestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Copy with timing fields zeroed.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for t in &mut r.tests {
            t.wall_ms = 0;
        }
        r
    }

    pub fn failures(&self) -> impl Iterator<Item = &TestRecord> {
        self.tests.iter().filter(|t| !t.pass)
    }
}

/// One check's numbers before timing and seeding are attached.
#[derive(Debug, Clone, Copy)]
struct Outcome {
    estimate: Complex64,
    stderr: f64,
    target: Complex64,
    tolerance: f64,
}

impl Outcome {
    /// Deterministic error measure against a bound.
    fn bound(value: f64, bound: f64) -> Self {
        Self { estimate: value.into(), stderr: 0.0, target: 0.0.into(), tolerance: bound }
    }

    /// Statistical gate `sigma * stderr + slack`, never tighter than rounding.
    fn stat(estimate: Complex64, stderr: f64, target: Complex64, sigma: f64, slack: f64) -> Self {
        let floor = 1e-12 * target.norm().max(1.0);
        Self { estimate, stderr, target, tolerance: (sigma * stderr + slack).max(floor) }
    }
}

struct Runner<'a> {
    cfg: &'a SuiteConfig,
    next: u64,
    tests: Vec<TestRecord>,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a SuiteConfig) -> Self {
        Self { cfg, next: 0, tests: Vec::new() }
    }

    fn seed(&mut self) -> u64 {
        let s = derive_trial_seed(self.cfg.seed, self.next);
        self.next += 1;
        s
    }

    /// Runs `f` with a fresh seed; all returned outcomes share its timing.
    fn group<F>(&mut self, f: F) -> Result<()>
    where
        F: FnOnce(u64) -> Result<Vec<(String, Outcome)>>,
    {
        let seed = self.seed();
        let start = Instant::now();
        let outcomes = f(seed)?;
        let wall_ms = start.elapsed().as_millis() as u64;
        for (name, o) in outcomes {
            let mut rec = TestRecord {
                name,
                estimate: o.estimate.into(),
                stderr: o.stderr,
                target: o.target.into(),
                tolerance: o.tolerance,
                pass: false,
                seed,
                wall_ms,
            };
            rec.pass = rec.recheck();
            self.tests.push(rec);
        }
        Ok(())
    }

    fn one<F>(&mut self, name: String, f: F) -> Result<()>
    where
        F: FnOnce(u64) -> Result<Outcome>,
    {
        self.group(|seed| Ok(vec![(name, f(seed)?)]))
    }

    fn finish(self) -> TestReport {
        let pass = !self.tests.is_empty() && self.tests.iter().all(|t| t.pass);
        TestReport { suite: self.cfg.suite.name().into(), config: self.cfg.clone(), tests: self.tests, pass }
    }
}

/// Runs the configured suite on `cfg.threads` workers.
pub fn run_suite(cfg: &SuiteConfig) -> Result<TestReport> {
    cfg.validate()?;
    with_threads(cfg.threads, || {
        let mut r = Runner::new(cfg);
        match cfg.suite {
            Suite::Sonia => sonia(&mut r)?,
            Suite::Intertwine => intertwine(&mut r)?,
            Suite::GaugeIntertwine => gauge_intertwine(&mut r)?,
            Suite::DeformedIntertwine => deformed_intertwine(&mut r)?,
            Suite::HaarSd => haar_sd(&mut r)?,
            Suite::HeatFk => heat_fk(&mut r)?,
            Suite::FkFokkerPlanck => fokker_planck(&mut r)?,
            Suite::YmSd => ym_sd(&mut r)?,
            Suite::Combinatorics => combinatorics(&mut r)?,
            Suite::Adjudication => adjudication(&mut r)?,
        }
        Ok(r.finish())
    })
}

/// Complex Ginibre matrix: i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Mat {
    Mat::from_fn(d, d, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
            / 2f64.sqrt()
    })
}

fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    // NaN propagates so that a broken case cannot pass
    xs.into_iter().fold(0.0, |acc, x| if x.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(x) })
}

fn max_abs(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn sonia(r: &mut Runner<'_>) -> Result<()> {
    let trials = r.cfg.trials.unwrap_or(50);
    let tol = r.cfg.tolerance.unwrap_or(1e-5);
    let eps = r.cfg.eps;
    for d in r.cfg.ds(&[1, 2, 3]) {
        r.one(format!("basis_sum_of_squares d={d}"), |_| {
            let b = lie_basis(d);
            let sum = b.iter().fold(Mat::zeros(d, d), |acc, w| acc + w * w);
            Ok(Outcome::bound(max_abs(&(sum + identity(d) * Complex64::from(d as f64))), 1e-13))
        })?;
        r.one(format!("basis_orthonormal d={d}"), |_| {
            let b = lie_basis(d);
            let mut err = 0.0f64;
            for (i, x) in b.iter().enumerate() {
                for (j, y) in b.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    err = err.max(((x * y.adjoint()).trace() - expect).norm());
                }
            }
            Ok(Outcome::bound(err, 1e-13))
        })?;
        r.group(|seed| {
            let errs: Vec<[f64; 8]> = map_trials(trials, |i| {
                let mut rng = trial_rng(seed, i as u64);
                let g = haar_sample(d, &mut rng);
                let a = ginibre(d, &mut rng);
                let b = ginibre(d, &mut rng);
                lemma::ALL.map(|id| relative_error(id.finite_difference(&g, &a, &b, eps), id.closed_form(&g, &a, &b)))
            });
            Ok(lemma::ALL
                .iter()
                .enumerate()
                .map(|(j, id)| {
                    (format!("lemma {} d={d}", id.name()), Outcome::bound(max_of(errs.iter().map(|e| e[j])), tol))
                })
                .collect())
        })?;
    }
    Ok(())
}

fn small_graphs() -> [GraphSpec; 3] {
    [GraphSpec::Cycle { m: 3 }, GraphSpec::Complete { m: 4 }, GraphSpec::Torus { side: 3, n: 2 }]
}

/// A simple circuit of the graph, if one is easy to name.
fn circuit(g: &Graph) -> Option<Loop> {
    if g.torus_shape().is_some() {
        return PlaquetteIndex::new(g).ok().map(|p| p.plaquettes[0].clone());
    }
    let (a, b) = *g.edges().first()?;
    let c = g.neighbors(b).find(|&c| c != a && g.has_edge(c, a))?;
    Some(Loop::from_cycle(vec![a, b, c]))
}

fn intertwine(r: &mut Runner<'_>) -> Result<()> {
    let trials = r.cfg.trials.unwrap_or(200);
    let tol = r.cfg.tolerance.unwrap_or(1e-4);
    let eps = r.cfg.eps;
    for (gname, g) in r.cfg.graphs(&small_graphs())? {
        for d in r.cfg.ds(&[1, 2, 3]) {
            r.one(format!("intertwine {gname} d={d}"), |seed| {
                let errs = map_trials(trials, |i| {
                    let mut rng = trial_rng(seed, i as u64);
                    let m = Connection::haar(g.clone(), d, &mut rng);
                    let c = random_geodesic_collection(&g, &mut rng, 4, 24);
                    let fd = casimir_fd_field(Target::Connection(&m), &c, eps)?;
                    Ok(relative_error(fd, casimir_rhs(Target::Connection(&m), &c, None)?))
                });
                Ok(Outcome::bound(max_of(errs.into_iter().collect::<Result<Vec<f64>>>()?), tol))
            })?;
            if let Some(circ) = circuit(&g) {
                r.one(format!("circuit {gname} d={d}"), |seed| {
                    let c = LoopCollection::single(circ.clone());
                    let errs = map_trials(trials.min(20), |i| {
                        let m = Connection::haar(g.clone(), d, &mut trial_rng(seed, i as u64));
                        let fd = casimir_fd_field(Target::Connection(&m), &c, eps)?;
                        let exact = -((d * c.total_length()) as f64) * m.tau(&c)?;
                        Ok(relative_error(fd, exact))
                    });
                    Ok(Outcome::bound(max_of(errs.into_iter().collect::<Result<Vec<f64>>>()?), tol))
                })?;
            }
            if d == 1 {
                // abelian case: tau is a character, A tau = -(sum of squared net crossings) tau
                r.one(format!("one_form {gname} d=1"), |seed| {
                    let errs = map_trials(trials, |i| {
                        let mut rng = trial_rng(seed, i as u64);
                        let m = Connection::haar(g.clone(), 1, &mut rng);
                        let c = random_geodesic_collection(&g, &mut rng, 4, 24);
                        let n2: i64 = occupation(&g, &c).differences().iter().map(|x| x * x).sum();
                        let fd = casimir_fd_field(Target::Connection(&m), &c, eps)?;
                        Ok(relative_error(fd, -(n2 as f64) * m.tau(&c)?))
                    });
                    Ok(Outcome::bound(max_of(errs.into_iter().collect::<Result<Vec<f64>>>()?), tol))
                })?;
            }
        }
    }
    Ok(())
}

fn gauge_intertwine(r: &mut Runner<'_>) -> Result<()> {
    let trials = r.cfg.trials.unwrap_or(200);
    let tol = r.cfg.tolerance.unwrap_or(1e-4);
    let eps = r.cfg.eps;
    for (gname, g) in r.cfg.graphs(&small_graphs())? {
        for d in r.cfg.ds(&[1, 2, 3]) {
            r.one(format!("gauge_intertwine {gname} d={d}"), |seed| {
                let errs = map_trials(trials, |i| {
                    let mut rng = trial_rng(seed, i as u64);
                    let field = GaugeField::haar(&g, d, &mut rng);
                    let c = random_discrete_collection(&g, &mut rng, 4, 24);
                    let fd = casimir_fd_field(Target::Gauge(&field), &c, eps)?;
                    Ok(relative_error(fd, casimir_rhs(Target::Gauge(&field), &c, None)?))
                });
                Ok(Outcome::bound(max_of(errs.into_iter().collect::<Result<Vec<f64>>>()?), tol))
            })?;
        }
    }
    Ok(())
}

fn deformed_intertwine(r: &mut Runner<'_>) -> Result<()> {
    let trials = r.cfg.trials.unwrap_or(100);
    let tol = r.cfg.tolerance.unwrap_or(1e-4);
    let eps = r.cfg.eps;
    let (gname, g) = r.cfg.torus(3, 2)?;
    let idx = PlaquetteIndex::new(&g)?;
    for d in r.cfg.ds(&[2]) {
        for k in r.cfg.ks(&[0.5, 1.0]) {
            r.one(format!("deformed_intertwine {gname} d={d} k={k}"), |seed| {
                let errs = map_trials(trials, |i| {
                    let mut rng = trial_rng(seed, i as u64);
                    let m = Connection::haar(g.clone(), d, &mut rng);
                    let c = random_geodesic_collection(&g, &mut rng, 4, 24);
                    let fd = deformed_casimir_fd(&m, &c, k, &idx, eps)?;
                    Ok(relative_error(fd, casimir_rhs(Target::Connection(&m), &c, Some((k, &idx)))?))
                });
                Ok(Outcome::bound(max_of(errs.into_iter().collect::<Result<Vec<f64>>>()?), tol))
            })?;
        }
    }
    Ok(())
}

/// Straight path of `len` steps along `axis` from `start`.
fn line(g: &Graph, start: Vertex, moves: &[(usize, i64)]) -> Vec<Vertex> {
    let mut out = vec![start];
    for &(axis, sign) in &moves[..moves.len() - 1] {
        let next = g.torus_step(*out.last().unwrap(), axis, sign).expect("torus");
        out.push(next);
    }
    out
}

/// Named fixture collections on a torus.
pub fn torus_fixtures(g: &Graph) -> Result<Vec<(&'static str, LoopCollection)>> {
    let (side, _) = g.torus_shape().ok_or(Error::NotATorus)?;
    let plaquette = Loop::from_cycle(line(g, 0, &[(0, 1), (1, 1), (0, -1), (1, -1)]));
    let winding = Loop::from_cycle(line(g, 0, &vec![(0, 1); side]));
    let rectangle = Loop::from_cycle(line(g, 0, &[(0, 1), (0, 1), (1, 1), (0, -1), (0, -1), (1, -1)]));
    let double = Loop::from_cycle(line(g, 0, &vec![(0, 1); 2 * side]));
    Ok(vec![
        ("plaquette", LoopCollection::single(plaquette.clone())),
        ("winding_and_reverse", LoopCollection::from_loops([winding.clone(), winding.reversed()])),
        ("rectangle", LoopCollection::single(rectangle)),
        ("plaquette_twice", {
            let mut c = LoopCollection::new();
            c.add(plaquette, 2);
            c
        }),
        ("double_winding", LoopCollection::single(double)),
        ("winding", LoopCollection::single(winding)),
    ])
}

fn fixture(g: &Graph, name: &str) -> Result<LoopCollection> {
    torus_fixtures(g)?
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| c)
        .ok_or_else(|| Error::Config(format!("no fixture {name}")))
}

/// Bound on the Monte Carlo standard error of the Haar residuals.
pub const HAAR_SD_MAX_STDERR: f64 = 0.05;

fn haar_sd(r: &mut Runner<'_>) -> Result<()> {
    let samples = r.cfg.trials.unwrap_or(10_000);
    let sigma = r.cfg.sigma;
    let (gname, g) = r.cfg.torus(3, 3)?;
    let names = ["plaquette", "winding_and_reverse", "rectangle", "plaquette_twice", "double_winding"];
    for d in r.cfg.ds(&[2]) {
        for name in names {
            let c = fixture(&g, name)?;
            r.group(|seed| {
                let opts = SdOptions::default();
                let est = crate::measures::sd_residual(&g, d, &c, SdMeasure::Haar, samples, &opts, seed)?;
                Ok(vec![
                    (
                        format!("haar_sd {name} {gname} d={d}"),
                        Outcome::stat(est.mean, est.stderr(), 0.0.into(), sigma, 0.0),
                    ),
                    (
                        format!("haar_sd_stderr {name} {gname} d={d}"),
                        Outcome::bound(est.stderr(), HAAR_SD_MAX_STDERR),
                    ),
                ])
            })?;
        }
    }
    Ok(())
}

/// Closed form of the heat-kernel expectation of one plaquette from the
/// trivial connection.
pub fn plaquette_closed_form(d: usize, t: f64) -> f64 {
    d as f64 * (-4.0 * d as f64 * t).exp()
}

/// Bound on the standard error of the literal closed-form check.
pub const HEAT_FK_MAX_STDERR: f64 = 0.01;

fn heat_fk(r: &mut Runner<'_>) -> Result<()> {
    let trials = r.cfg.trials.unwrap_or(100_000);
    let t = r.cfg.t.unwrap_or(0.1);
    let sigma = r.cfg.sigma;
    let (gname, g) = r.cfg.torus(3, 2)?;
    for d in r.cfg.ds(&[2]) {
        let trivial = Connection::trivial(g.clone(), d);
        let p = fixture(&g, "plaquette")?;
        let exact = plaquette_closed_form(d, t);
        for (label, conv) in
            [("literal", PotentialConvention::SignEveryFiring), ("pruned", PotentialConvention::PrunedDiagonal)]
        {
            r.group(|seed| {
                let est = FkSetup::new(&trivial, &p, t, FkMode::SmPlusMinus).potential(conv).estimate(trials, seed)?;
                Ok(vec![
                    (
                        format!("fk_plaquette_closed_form {label} d={d} t={t}"),
                        Outcome::stat(est.mean, est.stderr, exact.into(), sigma, 0.0),
                    ),
                    (
                        format!("fk_plaquette_stderr {label} d={d} t={t}"),
                        Outcome::bound(est.stderr, HEAT_FK_MAX_STDERR),
                    ),
                ])
            })?;
        }

        let m0 = Connection::haar(g.clone(), d, &mut trial_rng(r.cfg.seed, u64::MAX));
        let direct_trials = (trials / 10).max(100);
        for name in ["plaquette", "winding", "winding_and_reverse"] {
            let c = fixture(&g, name)?;
            r.one(format!("fk_vs_heat {name} {gname} d={d} t={t}"), |seed| {
                let fk = FkSetup::new(&m0, &c, t, FkMode::SmPlusMinus).estimate(trials, seed)?;
                let steps = unitary::default_steps(t);
                let direct = crate::measures::heat_direct_estimate(&c, &m0, t, steps, direct_trials, seed ^ 1)?;
                let se = fk.stderr.hypot(direct.stderr());
                Ok(Outcome::stat(fk.mean, se, direct.mean, sigma, 0.0))
            })?;
        }
    }
    Ok(())
}

/// Per-trial derivative estimate at `t = 0` from two horizons `t1 < t2 = 2 t1`
/// of the same trajectory, after removing the known diagonal decay
/// `exp(-d S t)`: Richardson extrapolation of `(exp(d S t) W(t) - tau) / t`.
fn fokker_planck_estimate(setup: &FkSetup<'_>, t1: f64, trials: usize, seed: u64) -> Result<Estimate> {
    let tau = setup.m0.tau(setup.c0)?;
    let lambda = (setup.m0.d() * setup.c0.total_length()) as f64;
    let values = map_trials(trials, |i| {
        let w1 = FkSetup { t: t1, ..*setup }.weight(&mut trial_rng(seed, i as u64))?;
        let w2 = FkSetup { t: 2.0 * t1, ..*setup }.weight(&mut trial_rng(seed, i as u64))?;
        let g1 = ((lambda * t1).exp() * w1 - tau) / t1;
        let g2 = ((2.0 * lambda * t1).exp() * w2 - tau) / (2.0 * t1);
        Ok(2.0 * g1 - g2 - lambda * tau)
    });
    Ok(Estimate::from_samples(&values.into_iter().collect::<Result<Vec<_>>>()?))
}

/// Relative slack of the Fokker-Planck gate, per unit time.
pub const FOKKER_PLANCK_SLACK: f64 = 0.15;

fn fokker_planck(r: &mut Runner<'_>) -> Result<()> {
    let trials = r.cfg.trials.unwrap_or(100_000);
    let t1 = r.cfg.t.unwrap_or(0.02);
    let sigma = r.cfg.sigma;
    let eps = r.cfg.eps;
    let (gname, g) = r.cfg.torus(3, 2)?;
    let idx = PlaquetteIndex::new(&g)?;
    for d in r.cfg.ds(&[2]) {
        let m0 = Connection::haar(g.clone(), d, &mut trial_rng(r.cfg.seed, u64::MAX));
        let mut modes = vec![(FkMode::SmPlusMinus, "sm".to_string())];
        for k in r.cfg.ks(&[0.5]) {
            modes.push((FkMode::Smd { k }, format!("smd(k={k})")));
        }
        for (mode, mlabel) in &modes {
            for name in ["plaquette", "winding", "winding_and_reverse"] {
                let c = fixture(&g, name)?;
                let target = match mode {
                    FkMode::Smd { k } => deformed_casimir_fd(&m0, &c, *k, &idx, eps)?,
                    _ => casimir_fd_field(Target::Connection(&m0), &c, eps)?,
                };
                for (clabel, conv) in
                    [("pruned", PotentialConvention::PrunedDiagonal), ("literal", PotentialConvention::SignEveryFiring)]
                {
                    r.one(format!("fokker_planck {name} {mlabel} {clabel} {gname} d={d} t={t1},{}", 2.0 * t1), |seed| {
                        let setup = FkSetup::new(&m0, &c, t1, *mode).potential(conv).plaquettes(&idx);
                        let est = fokker_planck_estimate(&setup, t1, trials, seed)?;
                        let slack = FOKKER_PLANCK_SLACK * target.norm() * t1;
                        Ok(Outcome::stat(est.mean, est.stderr(), target, sigma, slack))
                    })?;
                }
            }
        }
    }
    Ok(())
}

fn ym_sd(r: &mut Runner<'_>) -> Result<()> {
    let samples = r.cfg.trials.unwrap_or(10_000);
    let sigma = r.cfg.sigma;
    let (gname, g) = r.cfg.torus(3, 2)?;
    let opts = SdOptions::default();
    for d in r.cfg.ds(&[2]) {
        for k in r.cfg.ks(&[0.5]) {
            let cfg = YangMillsConfig::from_graph(g.clone(), d, k)?;
            let fixtures = [("plaquette", fixture(&g, "plaquette")?), ("rectangle", fixture(&g, "rectangle")?)];
            let tag = format!("{gname} d={d} k={k}");
            r.group(|seed| {
                let runs = ym_samples(&cfg, samples, &opts, seed);
                let mut out = Vec::new();
                for (name, c) in &fixtures {
                    let prepared = prepare_residual(&g, d, c, Some((k, cfg.plaquettes())), opts.orbit)?;
                    let est = residual_of_runs(&prepared, &runs)?;
                    out.push((format!("ym_sd {name} {tag}"), Outcome::stat(est.mean, est.stderr(), 0.0.into(), sigma, 0.0)));
                }
                let (metro, metro_se, acceptance) = plaquette_mean_of_runs(&cfg, &runs)?;
                out.push((format!("metropolis_acceptance {tag}"), Outcome {
                    estimate: acceptance.into(),
                    stderr: 0.0,
                    target: 0.52.into(),
                    tolerance: 0.47,
                }));
                let (lang, lang_se) = langevin_plaquette_mean(&cfg, 32, 2.0, 0.2, 50, DEFAULT_DT, seed ^ 1)?;
                out.push((
                    format!("metropolis_vs_langevin plaquette_trace {tag}"),
                    Outcome::stat(metro.into(), metro_se.hypot(lang_se), lang.into(), sigma, 0.0),
                ));
                Ok(out)
            })?;
        }
    }
    Ok(())
}

/// Violation counts of the combinatorial invariants on one random collection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InvariantCounts {
    pub reduction: u64,
    pub positive_geodesic: u64,
    pub occupation: u64,
    pub differences: u64,
    pub winding: u64,
    pub eulerian: u64,
    pub stationarity: u64,
}

impl InvariantCounts {
    fn add(&mut self, o: &InvariantCounts) {
        self.reduction += o.reduction;
        self.positive_geodesic += o.positive_geodesic;
        self.occupation += o.occupation;
        self.differences += o.differences;
        self.winding += o.winding;
        self.eulerian += o.eulerian;
        self.stationarity += o.stationarity;
    }
}

/// Checks every combinatorial invariant on a random case drawn from `rng`.
pub fn check_invariants<R: Rng + ?Sized>(g: &Graph, plaquettes: Option<&PlaquetteIndex>, rng: &mut R) -> Result<InvariantCounts> {
    let mut v = InvariantCounts::default();
    let bad = |b: bool| u64::from(!b);

    let steps = rng.random_range(2..12);
    let walk = random_closed_walk(g, rng, steps);
    let once = Loop::reduced_from_cycle(&walk);
    v.reduction += bad(Loop::reduced_from_cycle(once.cycle()) == once && once.is_geodesic());

    let c = random_geodesic_collection(g, rng, 3, 16);
    let occ = occupation(g, &c);
    let wind = winding(g, &c);
    let deformation = plaquettes.map(|p| Deformation { k: 1.0, plaquettes: p, graph: g });
    let ex = generator_expansion(&c, deformation)?;
    for term in &ex.terms {
        let out = &term.collection;
        if winding(g, out) != wind {
            v.winding += 1;
        }
        match term.class {
            TermClass::SplitPlus | TermClass::MergePlus => {
                v.occupation += bad(occupation(g, out) == occ);
            }
            TermClass::SplitMinus | TermClass::MergeMinus => {
                v.differences += bad(occupation(g, out).differences() == occ.differences());
            }
            _ => {}
        }
    }
    // raw positive outputs, before any reduction
    let loops: Vec<&Loop> = c.copies().collect();
    for e in g.oriented_edges() {
        for l in &loops {
            for (a, b) in split_pos_all(l, e)? {
                v.positive_geodesic += bad(a.is_geodesic() && b.is_geodesic());
            }
        }
        for (i, a) in loops.iter().enumerate() {
            for b in &loops[i + 1..] {
                for m in merge_pos_all(a, b, e)? {
                    v.positive_geodesic += bad(m.is_geodesic());
                }
            }
        }
    }

    v.eulerian += bad(occ.is_eulerian(g));
    let j = flow_of(g, &occ)?;
    v.eulerian += bad(j.is_flow(g) && j.is_eulerian(g));
    let q = markov_of_flow(g, &j)?;
    let totals = j.out_totals(g);
    let n = g.vertex_count();
    for y in 0..n {
        let s: num_rational::Ratio<i64> =
            (0..n).map(|x| num_rational::Ratio::from_integer(totals[x] as i64) * q[x][y]).sum();
        let expect = if totals[y] == 0 {
            // identity rows keep zero-mass vertices fixed
            num_rational::Ratio::from_integer(0)
        } else {
            num_rational::Ratio::from_integer(totals[y] as i64)
        };
        v.stationarity += bad(s == expect);
    }
    Ok(v)
}

fn combinatorics(r: &mut Runner<'_>) -> Result<()> {
    let trials = r.cfg.trials.unwrap_or(10_000);
    for (gname, g) in r.cfg.graphs(&[GraphSpec::Torus { side: 3, n: 2 }, GraphSpec::Complete { m: 4 }])? {
        let idx = if g.torus_shape().is_some() { Some(PlaquetteIndex::new(&g)?) } else { None };
        r.group(|seed| {
            let per = map_trials(trials, |i| check_invariants(&g, idx.as_ref(), &mut trial_rng(seed, i as u64)));
            let mut total = InvariantCounts::default();
            for p in per {
                total.add(&p?);
            }
            let rows = [
                ("reduction_idempotent", total.reduction),
                ("positive_outputs_geodesic", total.positive_geodesic),
                ("positive_conserves_occupation", total.occupation),
                ("negative_conserves_differences", total.differences),
                ("channels_conserve_winding", total.winding),
                ("occupation_eulerian_flow", total.eulerian),
                ("flow_markov_stationary", total.stationarity),
            ];
            Ok(rows
                .into_iter()
                .map(|(name, count)| (format!("{name} {gname}"), Outcome::bound(count as f64, 0.5)))
                .collect())
        })?;
    }
    Ok(())
}

fn adjudication(r: &mut Runner<'_>) -> Result<()> {
    let trials = r.cfg.trials.unwrap_or(100_000);
    let t = r.cfg.t.unwrap_or(0.1);
    let sigma = r.cfg.sigma;
    let eps = r.cfg.eps;
    let tol = r.cfg.tolerance.unwrap_or(1e-4);
    let (gname, g) = r.cfg.torus(3, 2)?;
    let idx = PlaquetteIndex::new(&g)?;
    for d in r.cfg.ds(&[2]) {
        // FD Casimir of P against -4dP on random connections
        r.group(|seed| {
            let cases = map_trials(10, |i| {
                let m = Connection::haar(g.clone(), d, &mut trial_rng(seed, i as u64));
                let p = plaquette_sum(&m, &idx)?;
                let mut fd = Complex64::new(0.0, 0.0);
                for pl in &idx.plaquettes {
                    fd += casimir_fd_field(Target::Connection(&m), &LoopCollection::single(pl.clone()), eps)?;
                }
                Ok((fd, p))
            });
            let cases = cases.into_iter().collect::<Result<Vec<_>>>()?;
            let four_d = -4.0 * d as f64;
            let err = max_of(cases.iter().map(|(fd, p)| relative_error(*fd, four_d * p)));
            let (fd, p) = cases[0];
            Ok(vec![
                (format!("casimir_P_is_minus_4dP {gname} d={d}"), Outcome::bound(err, tol)),
                (format!("casimir_P_ratio {gname} d={d}"), Outcome {
                    estimate: fd / p,
                    stderr: 0.0,
                    target: four_d.into(),
                    tolerance: tol * four_d.abs(),
                }),
            ])
        })?;

        let trivial = Connection::trivial(g.clone(), d);
        let p = fixture(&g, "plaquette")?;
        let exact = plaquette_closed_form(d, t);
        r.one(format!("fk_plaquette derived_potential {gname} d={d} t={t}"), |seed| {
            let est = FkSetup::new(&trivial, &p, t, FkMode::SmPlusMinus)
                .potential(PotentialConvention::SignEveryFiring)
                .estimate(trials, seed)?;
            Ok(Outcome::stat(est.mean, est.stderr, exact.into(), sigma, 0.0))
        })?;
        // the printed potential drops V+ - V- from the exponent: predicted miss factor
        let ctx = ChainContext::new(&g, d, ChainMode::SmPlusMinus).with_diagonal(Diagonal::Literal);
        let rates = ctx.rates(&p);
        let factor = (-t * (rates.v_plus as f64 - rates.v_minus as f64)).exp();
        r.one(format!("fk_plaquette printed_potential {gname} d={d} t={t} target=closed_form*exp(-t(V+-V-))"), |seed| {
            let est = FkSetup::new(&trivial, &p, t, FkMode::SmPlusMinus)
                .potential(PotentialConvention::Printed)
                .estimate(trials, seed)?;
            Ok(Outcome::stat(est.mean, est.stderr, (exact * factor).into(), sigma, 0.0))
        })?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Ym,
    Heat,
}

impl FromStr for SampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ym" => Ok(SampleKind::Ym),
            "heat" => Ok(SampleKind::Heat),
            other => Err(Error::Config(format!("unknown sampler '{other}'"))),
        }
    }
}

/// Raw observables for offline diagnostics: mean plaquette trace per retained
/// Yang-Mills sample, or the plaquette trace of heat-kernel samples from the
/// trivial connection at time `t`.
pub fn sample_observables(kind: SampleKind, cfg: &SuiteConfig) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let (_, g) = cfg.torus(3, 2)?;
    let d = cfg.ds(&[2])[0];
    let n = cfg.trials.unwrap_or(1000);
    with_threads(cfg.threads, || match kind {
        SampleKind::Ym => {
            let ym = YangMillsConfig::from_graph(g.clone(), d, cfg.ks(&[0.5])[0])?;
            let runs = ym_samples(&ym, n, &SdOptions::default(), cfg.seed);
            runs.iter()
                .flat_map(|r| r.samples.iter())
                .take(n)
                .map(|m| mean_plaquette_trace(m, &ym).map(Complex64::from))
                .collect()
        }
        SampleKind::Heat => {
            let t = cfg.t.unwrap_or(0.1);
            let p = fixture(&g, "plaquette")?;
            let m0 = Connection::trivial(g.clone(), d);
            let out = map_trials(n, |i| {
                let m = heat_connection_sample(&m0, t, unitary::default_steps(t), &mut trial_rng(cfg.seed, i as u64));
                m.tau(&p)
            });
            out.into_iter().collect()
        }
    })
}

/// CSV with header `trial_index,value_re,value_im`.
pub fn observables_csv(values: &[Complex64]) -> String {
    let mut s = String::from("trial_index,value_re,value_im\n");
    for (i, z) in values.iter().enumerate() {
        s.push_str(&format!("{i},{:e},{:e}\n", z.re, z.im));
    }
    s
}
