//! Equivalence with brute-force reference implementations.

mod common;

use bluegraph::analysis;
use bluegraph::geometry::{torus_distance, PointSet};
use bluegraph::irrigation::IrrigationGraph;
use bluegraph::rgg::NeighborIndex;
use proptest::prelude::*;

use common::{brute_isolated_cliques, brute_neighbors, bfs_labels, shifted_distance, view_adjacency};

#[test]
fn components_match_flood_fill_at_n_200() {
    for seed in 0..40u64 {
        let ps = PointSet::sample(200, 2, seed).unwrap();
        let idx = NeighborIndex::build(&ps, 0.09).unwrap();
        let c = 1 + (seed % 3) as usize;
        let g = IrrigationGraph::sample(&idx, &[c], seed).unwrap();
        let view = g.full_view();
        let lab = analysis::components(&view);
        assert_eq!(lab.labels, bfs_labels(&view_adjacency(&view)));
        assert_eq!(lab.is_connected(), analysis::is_connected(&view));
    }
}

#[test]
fn isolated_cliques_match_enumeration_at_n_150() {
    let mut seen = 0;
    for seed in 0..60u64 {
        let ps = PointSet::sample(150, 2, seed).unwrap();
        let idx = NeighborIndex::build(&ps, 0.08).unwrap();
        let c = 1 + (seed % 3) as usize;
        let g = IrrigationGraph::sample(&idx, &[c], seed).unwrap();
        let view = g.full_view();
        let rep = analysis::find_isolated_cliques(&view, c);
        let brute = brute_isolated_cliques(&view_adjacency(&view), c);
        assert_eq!(rep.cliques, brute);
        if !rep.is_empty() {
            assert!(!analysis::is_connected(&view));
            seen += 1;
        }
    }
    assert!(seen > 0, "no instance exercised a clique");
}

#[test]
fn irrigation_is_a_subgraph_with_the_degree_law() {
    for (d, r, seed) in [(1, 0.01, 1u64), (2, 0.1, 2), (3, 0.25, 3)] {
        let ps = PointSet::sample(300, d, seed).unwrap();
        let idx = NeighborIndex::build(&ps, r).unwrap();
        let brute = brute_neighbors(&ps, r);
        let g = IrrigationGraph::sample(&idx, &[2, 1, 3], seed).unwrap();
        for s in 0..=3 {
            let view = g.view(s).unwrap();
            let revealed = [0, 2, 3, 6][s];
            for i in 0..ps.len() {
                assert_eq!(view.out(i).len(), revealed.min(brute[i].len()));
                let mut out: Vec<u32> = view.out(i).to_vec();
                out.sort_unstable();
                out.dedup();
                assert_eq!(out.len(), view.out(i).len());
                assert!(out.iter().all(|&j| brute[i].contains(&(j as usize))));
            }
            for (a, b) in view.undirected_edges() {
                assert!(a < b && brute[a].contains(&b));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn torus_distance_matches_shift_enumeration(
        x in prop::collection::vec(0.0f64..1.0, 3),
        y in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        let a = torus_distance(&x, &y).unwrap();
        prop_assert!((a - shifted_distance(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn index_matches_brute_force(n in 1usize..120, d in 1usize..4, r in 0.01f64..0.9, seed in any::<u64>()) {
        let ps = PointSet::sample(n, d, seed).unwrap();
        let idx = NeighborIndex::build(&ps, r).unwrap();
        let brute = brute_neighbors(&ps, r);
        for i in 0..n {
            prop_assert_eq!(&idx.neighbors_of(i).unwrap(), &brute[i]);
        }
    }

    #[test]
    fn stage_views_are_nested(n in 2usize..150, r in 0.05f64..0.5, seed in any::<u64>()) {
        let ps = PointSet::sample(n, 2, seed).unwrap();
        let idx = NeighborIndex::build(&ps, r).unwrap();
        let g = IrrigationGraph::sample(&idx, &[1, 2, 1], seed).unwrap();
        let mut prev_edges = Vec::new();
        let mut prev_count = n;
        for s in 0..=3 {
            let view = g.view(s).unwrap();
            let edges = view.undirected_edges();
            prop_assert!(prev_edges.iter().all(|e| edges.binary_search(e).is_ok()));
            let count = analysis::components(&view).count;
            prop_assert!(count <= prev_count);
            prev_edges = edges;
            prev_count = count;
        }
    }
}
