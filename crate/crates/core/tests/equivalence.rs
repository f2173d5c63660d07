//! Randomized equivalence checks between the streaming, restricted and
//! offline pivot computations.

use std::sync::Arc;

use ccstream::clustering::{
    find_pivot, pivot_offline, pruned_pivot_clustering, pruned_pivot_offline, pruned_pivot_stream,
};
use ccstream::estimators::{run_est_ea, run_est_eb, SampleSizes, SubParams};
use ccstream::exact::{clustering_cost, pivot_cost, Partition};
use ccstream::mismatch::{clu, exact_mismatch_counts, partition_ab};
use ccstream::similarity::ExplicitGraph;
use ccstream::{NodeId, NodeStream, RankFunction, ReferenceSet, SimilarityOracle};
use proptest::prelude::*;

fn graph() -> impl Strategy<Value = ExplicitGraph> {
    (2usize..=11).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
            let mut edges = Vec::new();
            let mut i = 0;
            for u in 0..n {
                for v in u + 1..n {
                    if bits[i] {
                        edges.push((u, v));
                    }
                    i += 1;
                }
            }
            ExplicitGraph::from_edges(n, edges).unwrap()
        })
    })
}

// Node 4 probes 1 and 2, each of which re-resolves 0, before reaching its
// real pivot 3: five calls in all, so k = n = 5 times out.
#[test]
fn budget_of_n_can_time_out() {
    let g = ExplicitGraph::from_edges(5, [(0, 1), (0, 2), (1, 4), (2, 4), (3, 4)]).unwrap();
    let rf = RankFunction::from_order(&[0, 1, 2, 3, 4]);
    let u = NodeId(4);
    assert_eq!(pivot_offline(&g, &rf).pivot(u), NodeId(3));
    assert_eq!(pruned_pivot_offline(&g, &rf, 5, u), u);
    assert_eq!(pruned_pivot_offline(&g, &rf, 6, u), NodeId(3));
}

fn ids(n: usize) -> impl Iterator<Item = NodeId> {
    (0..n).map(NodeId::from)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn streaming_matches_offline(g in graph(), seed in any::<u64>(), k in 1usize..10) {
        let rf = RankFunction::new(seed);
        let stream = NodeStream::sequential(g.n());
        for u in ids(g.n()) {
            let (p, acc) = pruned_pivot_stream(&stream, u, &rf, k, &g).unwrap();
            prop_assert_eq!(p, pruned_pivot_offline(&g, &rf, k, u));
            prop_assert!(acc.passes_used <= k);
        }
    }

    #[test]
    fn shuffled_arrival_order_is_irrelevant(g in graph(), seed in any::<u64>(), k in 1usize..6) {
        let rf = RankFunction::new(seed);
        let mut order: Vec<NodeId> = ids(g.n()).collect();
        order.reverse();
        order.rotate_left((seed % g.n() as u64) as usize);
        let stream = NodeStream::with_order(order).unwrap();
        for u in ids(g.n()) {
            let (p, _) = pruned_pivot_stream(&stream, u, &rf, k, &g).unwrap();
            prop_assert_eq!(p, pruned_pivot_offline(&g, &rf, k, u));
        }
    }

    // The global budget counts every call in the tree, which may revisit
    // nodes; a node at rank position i makes at most 2^(i-1) - 1 calls.
    #[test]
    fn large_budget_is_plain_pivot(g in graph(), seed in any::<u64>()) {
        let rf = RankFunction::new(seed);
        let pivot = pivot_offline(&g, &rf);
        let pruned = pruned_pivot_clustering(&g, &rf, 1 << (g.n() - 1));
        prop_assert_eq!(pruned.pivots(), pivot.pivots());
    }

    #[test]
    fn find_pivot_agrees_whenever_it_answers(g in graph(), seed in any::<u64>(), k in 1usize..6, r in 0usize..12) {
        let rf = RankFunction::new(seed);
        let reference = ReferenceSet::top(&rf, g.n(), r.min(g.n()));
        for u in ids(g.n()) {
            if let Some(p) = find_pivot(u, &rf, &reference, k, &g) {
                prop_assert_eq!(p, pruned_pivot_offline(&g, &rf, k, u));
            }
        }
    }

    #[test]
    fn clusters_partition_the_nodes(g in graph(), seed in any::<u64>(), k in 1usize..6) {
        let rf = RankFunction::new(seed);
        let c = pruned_pivot_clustering(&g, &rf, k);
        let mut seen = vec![0; g.n()];
        for u in ids(g.n()) {
            for v in clu(u, &c, &g) {
                seen[v.index()] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn mismatch_split_sums_to_cost(g in graph(), seed in any::<u64>(), k in 1usize..6, r in 0usize..12) {
        let rf = RankFunction::new(seed);
        let reference = ReferenceSet::top(&rf, g.n(), r.min(g.n()));
        let counts = exact_mismatch_counts(&g, &rf, &reference, k).unwrap();
        let c = pruned_pivot_clustering(&g, &rf, k);
        prop_assert_eq!(counts.in_a + counts.in_b, counts.total);
        prop_assert_eq!(counts.total, clustering_cost(&g, &Partition::from(&c)).unwrap());
        prop_assert_eq!(pivot_cost(&g, &c), counts.total);
        let ab = partition_ab(g.n(), &rf, &reference, k, &g);
        if r >= g.n() {
            prop_assert!(ab.b().is_empty());
        }
    }

    #[test]
    fn full_sampling_estimators_are_exact(g in graph(), seed in any::<u64>(), k in 2usize..6, r in 0usize..12) {
        let n = g.n();
        let rf = RankFunction::new(seed);
        let reference = Arc::new(ReferenceSet::top(&rf, n, r.min(n)));
        let exact = exact_mismatch_counts(&g, &rf, &reference, k).unwrap();
        let stream = NodeStream::sequential(n);
        let sub = SubParams { k, beta: 0.25, sizes: SampleSizes::full(n), seed };
        let (ea, _) = run_est_ea(&stream, &sub, &rf, reference.clone(), &g).unwrap();
        let (eb, _) = run_est_eb(&stream, &sub, &rf, reference, &g).unwrap();
        prop_assert_eq!(ea, exact.in_a as f64);
        prop_assert_eq!(eb, exact.in_b as f64);
    }
}
