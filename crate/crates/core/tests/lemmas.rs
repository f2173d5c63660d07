//! Statistical checks of the sampling guarantees under scaled-down constants.

use std::sync::Arc;

use ccstream::clustering::ReferenceSet;
use ccstream::estimators::{is_high, run_est_eb, SampleSizes, SubParams, DEGREE_SLACK};
use ccstream::generate::{gnp, planted};
use ccstream::mismatch::{exact_mismatch_counts, partition_ab, MismatchGraph};
use ccstream::similarity::ExplicitGraph;
use ccstream::{NodeId, NodeStream, RankFunction, SimilarityOracle};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Test-mode scale that puts the theory size of R near `target · n`.
fn scale_for_r(n: usize, k: usize, beta: f64, target: f64) -> f64 {
    let nf = n as f64;
    target * nf / (48.0 * k as f64 * nf.powf(1.0 - beta) * nf.ln())
}

// B nodes have fewer than k neighbours in R, so their degree stays small.
#[test]
fn b_nodes_have_low_degree() {
    let (n, k, beta) = (2000, 2, 0.25);
    // Dense half with degree ~40, sparse half with degree ~3.
    let dense = gnp(n / 2, 0.08, 17);
    let sparse = gnp(n / 2, 0.006, 18);
    let edges = dense
        .edges()
        .map(|(u, v)| (u.index(), v.index()))
        .chain(sparse.edges().map(|(u, v)| (u.index() + n / 2, v.index() + n / 2)));
    let g = ExplicitGraph::from_edges(n, edges).unwrap();
    let scale = scale_for_r(n, k, beta, 0.6);
    let r = SampleSizes::theory(n, k, 0.0, 0.1, scale).r;
    assert!((0.55..0.65).contains(&(r as f64 / n as f64)), "r = {r}");
    let cap = DEGREE_SLACK * (n as f64).powf(beta);
    let mut over_cap = 0;
    let mut b_total = 0;
    for seed in 0..5 {
        let rf = RankFunction::new(seed);
        let reference = ReferenceSet::top(&rf, n, r);
        let in_r: std::collections::HashSet<NodeId> = reference.nodes().collect();
        let ab = partition_ab(n, &rf, &reference, k, &g);
        for u in ab.b() {
            b_total += 1;
            let nbrs = g.neighbors(u);
            assert!(nbrs.iter().filter(|v| in_r.contains(v)).count() < k);
            over_cap += usize::from(nbrs.len() as f64 > cap);
        }
    }
    assert!(b_total > 20, "only {b_total} B nodes");
    assert_eq!(over_cap, 0, "{over_cap} of {b_total} B nodes above {cap:.1}");
}

#[test]
fn high_low_classification() {
    let (n, k, beta, eps) = (1000, 5, 0.25, 0.5);
    let g = gnp(n, 0.05, 23);
    let rf = RankFunction::new(4);
    let reference = ReferenceSet::top(&rf, n, 300);
    let truth = MismatchGraph::new(&g, &rf, &reference, k);
    let degree: Vec<u64> = (0..n)
        .map(|u| (0..n).filter(|&v| truth.in_a(NodeId::from(u), NodeId::from(v))).count() as u64)
        .collect();
    let t1 = n / 2;
    let threshold_cap = 4.0 * (n as f64).powf(beta);
    let (mut checks, mut failures) = (0u64, 0u64);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10 {
        let mut in_s1 = vec![false; n];
        for i in sample(&mut rng, n, t1) {
            in_s1[i] = true;
        }
        for (u, &d) in degree.iter().enumerate() {
            let x = (0..n)
                .filter(|&v| in_s1[v] && truth.in_a(NodeId::from(u), NodeId::from(v)))
                .count() as u64;
            let d = d as f64;
            let ok = if is_high(x, t1, n, beta) {
                let est = n as f64 * x as f64 / t1 as f64;
                ((1.0 - eps) * d..=(1.0 + eps) * d).contains(&est)
            } else {
                d <= threshold_cap
            };
            checks += 1;
            failures += u64::from(!ok);
        }
    }
    let rate = failures as f64 / checks as f64;
    assert!(rate <= 0.05, "failure rate {rate:.4}");
}

// One-sample Est-EB is an unbiased estimate of |E_mis_B|.
#[test]
fn est_eb_is_unbiased() {
    let n = 40;
    let k = 3;
    let g = planted(n, 4, 0.6, 0.05, 8);
    let rf = RankFunction::new(12);
    let reference = Arc::new(ReferenceSet::top(&rf, n, 6));
    let exact = exact_mismatch_counts(&g, &rf, &reference, k).unwrap().in_b as f64;
    assert!(exact > 0.0);
    let stream = NodeStream::sequential(n);
    let sizes = SampleSizes { r: 6, t1: 1, t2: 1, t: 1 };
    let draws: Vec<f64> = (0..10_000u64)
        .map(|seed| {
            let sub = SubParams { k, beta: 0.25, sizes, seed };
            run_est_eb(&stream, &sub, &rf, reference.clone(), &g).unwrap().0
        })
        .collect();
    let m = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / m;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let se = (var / m).sqrt();
    assert!((mean - exact).abs() <= 3.0 * se, "mean {mean:.2} vs exact {exact} (se {se:.2})");
}
