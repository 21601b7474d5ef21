//! Random loops and collections for the verification suites.

use std::collections::VecDeque;

use rand::Rng;

use crate::loops::{Loop, LoopCollection};
use crate::topology::{Graph, Vertex};

/// Shortest path `from -> to` (inclusive), ties broken by vertex order.
pub fn shortest_path(graph: &Graph, from: Vertex, to: Vertex) -> Vec<Vertex> {
    if from == to {
        return vec![from];
    }
    let mut prev = vec![u32::MAX; graph.vertex_count()];
    prev[from as usize] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for w in graph.neighbors(u) {
            if prev[w as usize] == u32::MAX {
                prev[w as usize] = u;
                queue.push_back(w);
            }
        }
    }
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = prev[cur as usize];
        path.push(cur);
    }
    path.reverse();
    path
}

/// Closed walk: `steps` uniform random steps, closed by a shortest path.
/// Returned as a cyclic sequence (no repeated base point).
pub fn random_closed_walk<R: Rng + ?Sized>(graph: &Graph, rng: &mut R, steps: usize) -> Vec<Vertex> {
    let start = rng.random_range(0..graph.vertex_count()) as Vertex;
    let mut walk = vec![start];
    for _ in 0..steps {
        let cur = *walk.last().unwrap();
        let deg = graph.degree(cur);
        let next = graph.neighbors(cur).nth(rng.random_range(0..deg)).unwrap();
        walk.push(next);
    }
    let back = shortest_path(graph, *walk.last().unwrap(), start);
    walk.extend_from_slice(&back[1..]);
    walk.pop();
    walk
}

/// Random non-trivial geodesic loop of length at most `max_len`.
pub fn random_geodesic_loop<R: Rng + ?Sized>(graph: &Graph, rng: &mut R, max_len: usize) -> Loop {
    loop {
        let steps = rng.random_range(2..=max_len.max(3));
        let walk = random_closed_walk(graph, rng, steps);
        let l = Loop::reduced_from_cycle(&walk);
        if !l.is_trivial() && l.len() <= max_len {
            return l;
        }
    }
}

/// Random geodesic collection with at most `max_loops` loops and total
/// length at most `max_total`. Loops are sometimes repeated or reversed so
/// that merges with opposite crossings occur.
pub fn random_geodesic_collection<R: Rng + ?Sized>(
    graph: &Graph,
    rng: &mut R,
    max_loops: usize,
    max_total: usize,
) -> LoopCollection {
    let target = rng.random_range(1..=max_loops);
    let mut loops: Vec<Loop> = Vec::new();
    let mut total = 0;
    while loops.len() < target {
        let room = max_total - total;
        if room < 3 {
            break;
        }
        let candidate = match (loops.last(), rng.random_range(0..6)) {
            (Some(prev), 0) => prev.reversed(),
            (Some(prev), 1) => prev.clone(),
            _ => random_geodesic_loop(graph, rng, room.min(12)),
        };
        if candidate.len() > room {
            if loops.is_empty() {
                continue;
            }
            break;
        }
        total += candidate.len();
        loops.push(candidate);
    }
    LoopCollection::from_loops(loops)
}

/// Random collection of discrete (unreduced) loops.
pub fn random_discrete_collection<R: Rng + ?Sized>(
    graph: &Graph,
    rng: &mut R,
    max_loops: usize,
    max_total: usize,
) -> LoopCollection {
    let target = rng.random_range(1..=max_loops);
    let mut loops = Vec::new();
    let mut total = 0;
    for _ in 0..target {
        let room = max_total - total;
        if room < 2 {
            break;
        }
        let mut walk;
        loop {
            let steps = rng.random_range(1..=room.min(10));
            walk = random_closed_walk(graph, rng, steps);
            if walk.len() >= 2 && walk.len() <= room {
                break;
            }
        }
        total += walk.len();
        loops.push(Loop::from_cycle(walk));
    }
    LoopCollection::from_loops(loops)
}
