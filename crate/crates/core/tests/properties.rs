//! Structural properties of graphs, loops, connections and the unitary group.

use std::sync::Arc;

use holonomy::connection::{Connection, GaugeField};
use holonomy::exec::{map_trials, trial_rng};
use holonomy::generate::shortest_path;
use holonomy::harness::ginibre;
use holonomy::loops::{canonicalize, flow_of, occupation, reduce, BasedLoop, Loop, LoopCollection};
use holonomy::splitmerge::merge_pos_all;
use holonomy::stats::Estimate;
use holonomy::topology::{Graph, PlaquetteIndex, Vertex};
use holonomy::unitary::{expm, fd_casimir, haar_sample, lemma, random_algebra, unitary_defect};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn torus_regularity_and_plaquette_census() {
    assert!(Graph::torus(3, 1).is_err());
    for side in 3..=4 {
        for n in 2..=3 {
            let g = Graph::torus(side, n).unwrap();
            for v in 0..g.vertex_count() as Vertex {
                assert_eq!(g.degree(v), 2 * n);
            }
            let plaquettes = g.enumerate_plaquettes().unwrap();
            let expect = n * (n - 1) * side.pow(n as u32);
            assert_eq!(plaquettes.len(), expect);
            let mut sorted = plaquettes.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), expect);
            assert!(plaquettes.iter().all(|p| p.len() == 4 && p.is_geodesic()));
            let mut through = 0;
            for e in g.oriented_edges() {
                let hits = g.plaquettes_containing(e).unwrap();
                assert!(hits.iter().all(|(p, _)| sorted.binary_search(p).is_ok()));
                through += hits.len();
            }
            assert_eq!(through, 4 * expect);
        }
    }
}

fn walk(g: &Graph, start: usize, choices: &[usize]) -> Vec<Vertex> {
    let start = (start % g.vertex_count()) as Vertex;
    let mut w = vec![start];
    for &c in choices {
        let cur = *w.last().unwrap();
        w.push(g.neighbors(cur).nth(c % g.degree(cur)).unwrap());
    }
    let back = shortest_path(g, *w.last().unwrap(), start);
    w.extend_from_slice(&back[1..]);
    w
}

fn graphs() -> [Graph; 2] {
    [Graph::torus(3, 2).unwrap(), Graph::complete(4).unwrap()]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10_000, ..ProptestConfig::default() })]

    #[test]
    fn reduction_and_rotation_of_based_loops(start in 0usize..64, choices in prop::collection::vec(0usize..8, 2..38), k in 0usize..64) {
        for g in graphs() {
            let w = BasedLoop::new(&g, walk(&g, start, &choices)).unwrap();
            let r = reduce(&g, &w).unwrap();
            prop_assert!(r.is_trivial() || r.is_geodesic());
            let again = BasedLoop::new(&g, { let mut b = r.based(); if b.len() < 3 { b.clear(); } b });
            if let Ok(again) = again {
                prop_assert_eq!(reduce(&g, &again).unwrap(), r.clone());
            }
            let rot = w.rotate(k % w.len());
            prop_assert_eq!(canonicalize(&g, &rot).unwrap(), canonicalize(&g, &w).unwrap());
            prop_assert_eq!(reduce(&g, &rot).unwrap(), r.clone());
            let raw = LoopCollection::single(canonicalize(&g, &w).unwrap());
            let red = LoopCollection::single(r.clone());
            let raw_occ = occupation(&g, &raw);
            prop_assert!(raw_occ.is_eulerian(&g));
            prop_assert_eq!(raw_occ.differences(), occupation(&g, &red).differences());
            prop_assert_eq!(flow_of(&g, &raw_occ).unwrap(), flow_of(&g, &occupation(&g, &red)).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1_000, ..ProptestConfig::default() })]

    #[test]
    fn merge_is_symmetric(s1 in 0usize..64, c1 in prop::collection::vec(0usize..8, 2..10), s2 in 0usize..64, c2 in prop::collection::vec(0usize..8, 2..10)) {
        let g = Graph::torus(3, 2).unwrap();
        let cyc = |s, c: &[usize]| {
            let mut w = walk(&g, s, c);
            w.pop();
            Loop::reduced_from_cycle(&w)
        };
        let a = cyc(s1, &c1);
        let b = cyc(s2, &c2);
        prop_assume!(!a.is_trivial() && !b.is_trivial());
        for e in g.oriented_edges() {
            let mut ab = merge_pos_all(&a, &b, e).unwrap();
            let mut ba = merge_pos_all(&b, &a, e).unwrap();
            ab.sort();
            ba.sort();
            prop_assert_eq!(ab, ba);
        }
    }

    #[test]
    fn traces_are_gauge_rotation_and_reduction_invariant(seed in any::<u64>(), start in 0usize..64, choices in prop::collection::vec(0usize..8, 2..20), d in 1usize..4) {
        let g = Arc::new(Graph::torus(3, 2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Connection::haar(g.clone(), d, &mut rng);
        let mut w = walk(&g, start, &choices);
        w.pop();
        let raw = Loop::from_cycle(w.clone());
        let red = Loop::reduced_from_cycle(&w);
        let c = LoopCollection::single(raw.clone());
        let h = GaugeField::haar(&g, d, &mut rng);
        let tau = m.tau(&c).unwrap();
        prop_assert!((m.gauge_transform(&h).unwrap().tau(&c).unwrap() - tau).norm() < 1e-10);
        prop_assert!((m.trace(&red).unwrap() - tau).norm() < 1e-12);
        let mut rotated = w.clone();
        rotated.rotate_left(start % w.len());
        let direct = rotated.iter().zip(rotated.iter().cycle().skip(1)).fold(holonomy::unitary::identity(d), |acc, (&x, &y)| {
            m.oriented(x, y).unwrap() * acc
        });
        prop_assert!((direct.trace() - tau).norm() < 1e-12);
    }

    #[test]
    fn exponentials_of_the_algebra_are_unitary(seed in any::<u64>(), d in 1usize..5, scale in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_algebra(d, 1.0, &mut rng);
        prop_assert!(unitary_defect(&expm(&x, scale).unwrap()) < 1e-12);
        prop_assert!(unitary_defect(&haar_sample(d, &mut rng)) < 1e-12);
    }
}

#[test]
fn casimir_is_centered_under_haar() {
    for d in 1..=3 {
        let mut rng = trial_rng(30, d as u64);
        let a = ginibre(d, &mut rng);
        let b = ginibre(d, &mut rng);
        let values: Vec<Complex64> = map_trials(4000, |i| {
            let g = haar_sample(d, &mut trial_rng(31, (d * 10_000 + i) as u64));
            fd_casimir(|h| lemma::u(h, &a, &b) + lemma::w(h, &a, &b) * 0.5, &g, 1e-3)
        });
        let est = Estimate::from_samples(&values);
        assert!(est.mean.norm() < 4.0 * est.stderr(), "d={d}: {} +- {}", est.mean, est.stderr());
    }
}

#[test]
fn one_dimensional_casimir_is_the_second_derivative() {
    // f(e^{i w}) = 2 cos(3w) + sin(w): second derivative -18 cos(3w) - sin(w)
    for &w in &[0.0, 0.4, 1.3, -2.2] {
        let g = holonomy::unitary::Mat::from_element(1, 1, Complex64::from_polar(1.0, w));
        let f = |h: &holonomy::unitary::Mat| {
            let z = h[(0, 0)];
            2.0 * (z.powi(3) + z.powi(-3)) / 2.0 + (z - z.inv()) / Complex64::new(0.0, 2.0)
        };
        let fd = fd_casimir(f, &g, 1e-3);
        let exact = -18.0 * (3.0 * w).cos() - w.sin();
        assert!((fd - exact).norm() < 1e-5 * exact.abs().max(1.0), "{fd} vs {exact}");
    }
    let g = Graph::torus(3, 2).unwrap();
    assert_eq!(PlaquetteIndex::new(&g).unwrap().len(), 18);
}
