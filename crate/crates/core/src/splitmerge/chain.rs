use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use super::{merge_at, merge_neg_at, split_at, split_neg_at};
use crate::error::{Error, Result};
use crate::loops::{accumulate_crossings, Loop, LoopCollection};
use crate::topology::{Graph, OrientedEdge, PlaquetteIndex, Vertex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    SmPlus(OrientedEdge),
    /// Ordered pair `(x, y)`: a crossing of `(x, y)` meets a crossing of `(y, x)`.
    SmMinus(OrientedEdge),
    DPlus(OrientedEdge),
    DMinus(OrientedEdge),
    Vertex(Vertex),
}

impl Channel {
    /// Positive channels flip the sign of the Feynman-Kac weight.
    pub fn is_positive(self) -> bool {
        matches!(self, Channel::SmPlus(_) | Channel::DPlus(_))
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::SmPlus(e) => write!(f, "SMplus({},{})", e.tail, e.head),
            Channel::SmMinus(e) => write!(f, "SMminus({},{})", e.tail, e.head),
            Channel::DPlus(e) => write!(f, "Dplus({},{})", e.tail, e.head),
            Channel::DMinus(e) => write!(f, "Dminus({},{})", e.tail, e.head),
            Channel::Vertex(x) => write!(f, "Vertex({x})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainMode {
    SmPlus,
    SmPlusMinus,
    Smd { k: f64 },
}

/// Treatment of positive firings whose two indices coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diagonal {
    /// Indices drawn independently, rate `N^2`; coinciding draws leave the state unchanged.
    Literal,
    /// Only distinct index pairs, rate `N(N-1)`.
    Pruned,
}

#[derive(Debug, Clone, Copy)]
pub struct ChainContext<'a> {
    pub graph: &'a Graph,
    pub plaquettes: Option<&'a PlaquetteIndex>,
    pub d: usize,
    pub mode: ChainMode,
    pub diagonal: Diagonal,
}

impl<'a> ChainContext<'a> {
    pub fn new(graph: &'a Graph, d: usize, mode: ChainMode) -> Self {
        Self { graph, plaquettes: None, d, mode, diagonal: Diagonal::Literal }
    }

    pub fn with_plaquettes(mut self, plaquettes: &'a PlaquetteIndex) -> Self {
        self.plaquettes = Some(plaquettes);
        self
    }

    pub fn with_diagonal(mut self, diagonal: Diagonal) -> Self {
        self.diagonal = diagonal;
        self
    }

    /// Rate per crossing of each plaquette-merge channel: `(k/d) 2(n-1)`.
    fn plaquette_rate(&self) -> f64 {
        match (self.mode, self.plaquettes) {
            (ChainMode::Smd { k }, Some(p)) => k / self.d as f64 * 2.0 * (p.dim() as f64 - 1.0),
            _ => 0.0,
        }
    }

    fn counts(&self, state: &[Loop]) -> Vec<u64> {
        let mut counts = vec![0u64; 2 * self.graph.edge_count()];
        for l in state {
            accumulate_crossings(self.graph, l, 1, &mut counts);
        }
        counts
    }

    fn smplus_rate(&self, n: u64) -> f64 {
        match self.diagonal {
            Diagonal::Literal => (n * n) as f64,
            Diagonal::Pruned => (n * n.saturating_sub(1)) as f64,
        }
    }

    fn channel_list(&self, counts: &[u64]) -> Vec<(Channel, f64)> {
        let dr = self.plaquette_rate();
        let mut out = Vec::new();
        for (i, &n) in counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let e = self.graph.oriented_edge(i);
            let r = self.smplus_rate(n);
            if r > 0.0 {
                out.push((Channel::SmPlus(e), r));
            }
            if self.mode != ChainMode::SmPlus {
                let back = counts[i ^ 1];
                if back > 0 {
                    out.push((Channel::SmMinus(e), (n * back) as f64));
                }
            }
            if dr > 0.0 {
                out.push((Channel::DPlus(e), dr * n as f64));
                out.push((Channel::DMinus(e), dr * n as f64));
            }
        }
        out
    }

    fn summary(&self, counts: &[u64]) -> RateSummary {
        let s: u64 = counts.iter().sum();
        let v_plus: u64 = counts.iter().map(|n| n * n).sum();
        let v_minus: u64 = counts.chunks(2).map(|c| 2 * c[0] * c[1]).sum();
        let deformation = 2.0 * self.plaquette_rate() * s as f64;
        let mut total = match self.diagonal {
            Diagonal::Literal => v_plus as f64,
            Diagonal::Pruned => (v_plus - s) as f64,
        };
        if self.mode != ChainMode::SmPlus {
            total += v_minus as f64;
        }
        total += deformation;
        RateSummary { s, v_plus, v_minus, deformation, total }
    }

    /// Applies one sampled transition of `ch` to the loop copies in `state`.
    fn apply<R: Rng + ?Sized>(&self, state: &mut Vec<Loop>, ch: Channel, rng: &mut R) -> Result<()> {
        match ch {
            Channel::SmPlus(e) => {
                let xs = crossing_list(state, e);
                let n = xs.len();
                let a = pick(rng, n)?;
                let b = match self.diagonal {
                    Diagonal::Literal => rng.random_range(0..n),
                    Diagonal::Pruned => {
                        if n < 2 {
                            return Err(Error::ZeroRateChannel);
                        }
                        let b = rng.random_range(0..n - 1);
                        if b >= a {
                            b + 1
                        } else {
                            b
                        }
                    }
                };
                if a != b {
                    cut_or_join(state, xs[a], xs[b], false);
                }
            }
            Channel::SmMinus(e) => {
                let fwd = crossing_list(state, e);
                let bwd = crossing_list(state, e.reversed());
                let a = fwd[pick(rng, fwd.len())?];
                let b = bwd[pick(rng, bwd.len())?];
                cut_or_join(state, a, b, true);
            }
            Channel::DPlus(e) | Channel::DMinus(e) => {
                let plaquettes = self.plaquettes.ok_or(Error::NotATorus)?;
                let xs = crossing_list(state, e);
                let (c, i) = xs[pick(rng, xs.len())?];
                let target = if matches!(ch, Channel::DPlus(_)) { e } else { e.reversed() };
                let oi = self
                    .graph
                    .oriented_index(target.tail, target.head)
                    .ok_or(Error::InvalidPath(target.tail, target.head))?;
                let through = plaquettes.through(oi);
                let (p, pos) = through[pick(rng, through.len())?];
                let eta = &plaquettes.plaquettes[p];
                state[c] = if matches!(ch, Channel::DPlus(_)) {
                    merge_at(&state[c], i, eta, pos)
                } else {
                    merge_neg_at(&state[c], i, eta, pos)
                };
            }
            Channel::Vertex(x) => {
                let vs: Vec<(usize, usize)> = state
                    .iter()
                    .enumerate()
                    .flat_map(|(c, l)| l.visits(x).into_iter().map(move |i| (c, i)))
                    .collect();
                let a = pick(rng, vs.len())?;
                let b = rng.random_range(0..vs.len());
                if a != b {
                    cut_or_join(state, vs[a], vs[b], false);
                }
            }
        }
        Ok(())
    }
}

fn pick<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::ZeroRateChannel);
    }
    Ok(rng.random_range(0..n))
}

fn crossing_list(state: &[Loop], e: OrientedEdge) -> Vec<(usize, usize)> {
    state
        .iter()
        .enumerate()
        .flat_map(|(c, l)| l.crossings(e.tail, e.head).into_iter().map(move |i| (c, i)))
        .collect()
}

/// Splits one copy or joins two copies at the given (copy, position) pairs.
fn cut_or_join(state: &mut Vec<Loop>, (ca, ia): (usize, usize), (cb, ib): (usize, usize), negative: bool) {
    if ca == cb {
        let (u, v) = if negative { split_neg_at(&state[ca], ia, ib) } else { split_at(&state[ca], ia, ib) };
        state[ca] = u;
        state.push(v);
    } else {
        let merged = if negative {
            merge_neg_at(&state[ca], ia, &state[cb], ib)
        } else {
            merge_at(&state[ca], ia, &state[cb], ib)
        };
        let (hi, lo) = (ca.max(cb), ca.min(cb));
        state.swap_remove(hi);
        state[lo] = merged;
    }
}

fn copies_of(c: &LoopCollection) -> Vec<Loop> {
    c.copies().cloned().collect()
}

/// Active channels and their rates for a collection.
pub fn channels(ctx: &ChainContext<'_>, c: &LoopCollection) -> Vec<(Channel, f64)> {
    let state = copies_of(c);
    ctx.channel_list(&ctx.counts(&state))
}

fn channel_rate(ctx: &ChainContext<'_>, state: &[Loop], ch: Channel) -> f64 {
    let counts = ctx.counts(state);
    let idx = |e: OrientedEdge| ctx.graph.oriented_index(e.tail, e.head);
    match ch {
        Channel::SmPlus(e) => idx(e).map_or(0.0, |i| ctx.smplus_rate(counts[i])),
        Channel::SmMinus(e) => idx(e).map_or(0.0, |i| (counts[i] * counts[i ^ 1]) as f64),
        Channel::DPlus(e) | Channel::DMinus(e) => {
            let per = if ctx.plaquettes.is_some() {
                match ctx.mode {
                    ChainMode::Smd { .. } => ctx.plaquette_rate(),
                    // the channel may be sampled on its own outside SMD mode
                    _ => 1.0,
                }
            } else {
                0.0
            };
            idx(e).map_or(0.0, |i| per * counts[i] as f64)
        }
        Channel::Vertex(x) => {
            let n: usize = state.iter().map(|l| l.visits(x).len()).sum();
            (n * n) as f64
        }
    }
}

/// One uniformly sampled transition of the given channel.
pub fn sample_transition<R: Rng + ?Sized>(
    ctx: &ChainContext<'_>,
    c: &LoopCollection,
    ch: Channel,
    rng: &mut R,
) -> Result<LoopCollection> {
    let mut state = copies_of(c);
    if channel_rate(ctx, &state, ch) <= 0.0 {
        return Err(Error::ZeroRateChannel);
    }
    ctx.apply(&mut state, ch, rng)?;
    Ok(LoopCollection::from_loops(state))
}

#[derive(Debug, Clone, Serialize)]
pub struct Jump {
    pub t: f64,
    pub channel: String,
    pub state_size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainPath {
    pub jumps: Vec<Jump>,
    #[serde(skip)]
    pub states: Vec<LoopCollection>,
    #[serde(skip)]
    pub positive_firings: u64,
}

impl ChainPath {
    pub fn final_state(&self) -> &LoopCollection {
        self.states.last().expect("path holds the initial state")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("chain path serializes")
    }
}

/// Exact event-driven simulation on `[0, t]`.
pub fn simulate_chain<R: Rng + ?Sized>(
    ctx: &ChainContext<'_>,
    c0: &LoopCollection,
    t: f64,
    rng: &mut R,
) -> Result<ChainPath> {
    let mut state = copies_of(c0);
    let mut path = ChainPath { jumps: Vec::new(), states: vec![c0.clone()], positive_firings: 0 };
    let mut now = 0.0;
    loop {
        let list = ctx.channel_list(&ctx.counts(&state));
        let total: f64 = list.iter().map(|(_, r)| r).sum();
        if total <= 0.0 {
            break;
        }
        now += Exp::new(total).expect("positive rate").sample(rng);
        if now > t {
            break;
        }
        let ch = choose(&list, total, rng);
        ctx.apply(&mut state, ch, rng)?;
        if ch.is_positive() {
            path.positive_firings += 1;
        }
        let collection = LoopCollection::from_loops(state.iter().cloned());
        path.jumps.push(Jump { t: now, channel: ch.to_string(), state_size: collection.count() });
        path.states.push(collection);
    }
    Ok(path)
}

fn choose<R: Rng + ?Sized>(list: &[(Channel, f64)], total: f64, rng: &mut R) -> Channel {
    let mut u = rng.random::<f64>() * total;
    for &(ch, r) in list {
        if u < r {
            return ch;
        }
        u -= r;
    }
    list.last().expect("non-empty channel list").0
}

/// Occupation summary of a chain state, the input of Feynman-Kac potentials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSummary {
    pub s: u64,
    pub v_plus: u64,
    pub v_minus: u64,
    /// Total plaquette-merge rate, both signs.
    pub deformation: f64,
    /// Total active jump rate.
    pub total: f64,
}

/// Outcome of one trajectory: positive firings, the integrated potential and the final state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub positive_firings: u64,
    pub integral: f64,
    pub final_state: Vec<Loop>,
}

impl<'a> ChainContext<'a> {
    /// Rate totals of a state, as seen by the Feynman-Kac potential.
    pub fn rates(&self, c: &LoopCollection) -> RateSummary {
        self.summary(&self.counts(&copies_of(c)))
    }

    /// Runs one trajectory on `[0, t]` accumulating `int a(L_s) ds` exactly.
    pub fn trajectory<R, F>(&self, c0: &LoopCollection, t: f64, potential: F, rng: &mut R) -> Result<Trajectory>
    where
        R: Rng + ?Sized,
        F: Fn(&RateSummary) -> f64,
    {
        let mut state = copies_of(c0);
        let mut now = 0.0;
        let mut integral = 0.0;
        let mut positive_firings = 0;
        loop {
            let counts = self.counts(&state);
            let summary = self.summary(&counts);
            let a = potential(&summary);
            if summary.total <= 0.0 {
                integral += a * (t - now);
                break;
            }
            let hold = Exp::new(summary.total).expect("positive rate").sample(rng);
            if now + hold >= t {
                integral += a * (t - now);
                break;
            }
            integral += a * hold;
            now += hold;
            let list = self.channel_list(&counts);
            let ch = choose(&list, summary.total, rng);
            self.apply(&mut state, ch, rng)?;
            if ch.is_positive() {
                positive_firings += 1;
            }
        }
        Ok(Trajectory { positive_firings, integral, final_state: state })
    }
}
