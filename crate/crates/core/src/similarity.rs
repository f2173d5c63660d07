//! Similarity oracles: the only channel through which algorithms see edges.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// A node, identified by its zero-based arrival position in the stream.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    #[inline]
    fn from(i: usize) -> Self {
        NodeId(u32::try_from(i).expect("node index exceeds u32"))
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Monotone query counter, shareable across threads.
#[derive(Debug, Default)]
pub struct QueryCounter(AtomicU64);

impl QueryCounter {
    #[inline]
    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

/// Answers `sim(u, v)` for nodes of one stream.
///
/// Implementors provide [`similar`](Self::similar) for distinct in-range
/// nodes; the provided [`sim`](Self::sim) adds reflexivity and counts every
/// call, including `sim(u, u)`.
pub trait SimilarityOracle: Send + Sync {
    /// Number of nodes.
    fn n(&self) -> usize;

    /// Raw symmetric predicate for `u != v`. Not counted.
    fn similar(&self, u: NodeId, v: NodeId) -> bool;

    fn counter(&self) -> &QueryCounter;

    #[inline]
    fn sim(&self, u: NodeId, v: NodeId) -> bool {
        self.counter().bump();
        u == v || self.similar(u, v)
    }

    /// Range-checked [`sim`](Self::sim).
    fn try_sim(&self, u: NodeId, v: NodeId) -> Result<bool> {
        let n = self.n();
        if u.index() >= n || v.index() >= n {
            return Err(Error::arg(format!(
                "node pair ({u}, {v}) out of range for n = {n}"
            )));
        }
        Ok(self.sim(u, v))
    }

    fn query_count(&self) -> u64 {
        self.counter().get()
    }

    /// Sorted neighbor list, excluding `u`. Offline use only; not counted.
    fn neighbors(&self, u: NodeId) -> Vec<NodeId> {
        (0..self.n())
            .map(NodeId::from)
            .filter(|&v| v != u && self.similar(u, v))
            .collect()
    }

    /// `|{v != u : sim(u, v)}|`. Offline use only.
    fn degree(&self, u: NodeId) -> usize {
        self.neighbors(u).len()
    }
}

impl<T: SimilarityOracle + ?Sized> SimilarityOracle for &T {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn similar(&self, u: NodeId, v: NodeId) -> bool {
        (**self).similar(u, v)
    }
    fn counter(&self) -> &QueryCounter {
        (**self).counter()
    }
    fn neighbors(&self, u: NodeId) -> Vec<NodeId> {
        (**self).neighbors(u)
    }
}

/// Per-run view of a shared oracle with its own query counter.
pub struct Counted<'a> {
    inner: &'a dyn SimilarityOracle,
    counter: QueryCounter,
}

impl<'a> Counted<'a> {
    pub fn new(inner: &'a dyn SimilarityOracle) -> Self {
        Counted {
            inner,
            counter: QueryCounter::default(),
        }
    }
}

impl SimilarityOracle for Counted<'_> {
    fn n(&self) -> usize {
        self.inner.n()
    }
    #[inline]
    fn similar(&self, u: NodeId, v: NodeId) -> bool {
        self.inner.similar(u, v)
    }
    fn counter(&self) -> &QueryCounter {
        &self.counter
    }
    fn neighbors(&self, u: NodeId) -> Vec<NodeId> {
        self.inner.neighbors(u)
    }
}

/// Graph given by an explicit positive-edge list.
#[derive(Debug)]
pub struct ExplicitGraph {
    adj: Vec<Vec<NodeId>>,
    edges: usize,
    counter: QueryCounter,
}

impl ExplicitGraph {
    /// Builds the graph; self-loops and duplicate edges are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::arg(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            if u != v {
                adj[u].push(NodeId::from(v));
                adj[v].push(NodeId::from(u));
            }
        }
        let mut total = 0;
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            total += list.len();
        }
        Ok(ExplicitGraph {
            adj,
            edges: total / 2,
            counter: QueryCounter::default(),
        })
    }

    pub fn empty(n: usize) -> Self {
        ExplicitGraph {
            adj: vec![Vec::new(); n],
            edges: 0,
            counter: QueryCounter::default(),
        }
    }

    /// Materializes the graph of any oracle by exhaustive pair scan.
    pub fn from_oracle(oracle: &dyn SimilarityOracle) -> Self {
        let n = oracle.n();
        let adj: Vec<Vec<NodeId>> = (0..n).map(|u| oracle.neighbors(NodeId::from(u))).collect();
        let edges = adj.iter().map(Vec::len).sum::<usize>() / 2;
        ExplicitGraph {
            adj,
            edges,
            counter: QueryCounter::default(),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn adjacency(&self, u: NodeId) -> &[NodeId] {
        &self.adj[u.index()]
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, list)| {
            let u = NodeId::from(u);
            list.iter().filter(move |&&v| u < v).map(move |&v| (u, v))
        })
    }
}

impl SimilarityOracle for ExplicitGraph {
    fn n(&self) -> usize {
        self.adj.len()
    }

    #[inline]
    fn similar(&self, u: NodeId, v: NodeId) -> bool {
        let (a, b) = (&self.adj[u.index()], &self.adj[v.index()]);
        if a.len() <= b.len() {
            a.binary_search(&v).is_ok()
        } else {
            b.binary_search(&u).is_ok()
        }
    }

    fn counter(&self) -> &QueryCounter {
        &self.counter
    }

    fn neighbors(&self, u: NodeId) -> Vec<NodeId> {
        self.adj[u.index()].clone()
    }

    fn degree(&self, u: NodeId) -> usize {
        self.adj[u.index()].len()
    }
}

/// Dense embeddings; `u ~ v` iff `cos(u, v) > theta`.
///
/// Cosine against a zero vector is taken as `-1`, so zero vectors are never
/// similar to anything but themselves.
#[derive(Debug)]
pub struct EmbeddingOracle {
    dim: usize,
    data: Vec<f32>,
    norms: Vec<f64>,
    theta: f64,
    counter: QueryCounter,
}

impl EmbeddingOracle {
    /// `data` is row-major, `n * dim` values.
    pub fn new(dim: usize, data: Vec<f32>, theta: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Format("embedding dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Format(format!(
                "{} values is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        let norms = data
            .chunks_exact(dim)
            .map(|row| row.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt())
            .collect();
        Ok(EmbeddingOracle {
            dim,
            data,
            norms,
            theta,
            counter: QueryCounter::default(),
        })
    }

    pub fn from_rows(rows: &[Vec<f32>], theta: f64) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Format("embedding rows differ in dimension".into()));
        }
        Self::new(dim, rows.concat(), theta)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Same vectors under a different threshold.
    pub fn with_theta(&self, theta: f64) -> Self {
        EmbeddingOracle {
            dim: self.dim,
            data: self.data.clone(),
            norms: self.norms.clone(),
            theta,
            counter: QueryCounter::default(),
        }
    }

    pub fn row(&self, u: NodeId) -> &[f32] {
        let i = u.index() * self.dim;
        &self.data[i..i + self.dim]
    }

    pub fn cosine(&self, u: NodeId, v: NodeId) -> f64 {
        let (nu, nv) = (self.norms[u.index()], self.norms[v.index()]);
        if nu == 0.0 || nv == 0.0 {
            return -1.0;
        }
        let dot: f64 = self
            .row(u)
            .iter()
            .zip(self.row(v))
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum();
        (dot / (nu * nv)).clamp(-1.0, 1.0)
    }
}

impl SimilarityOracle for EmbeddingOracle {
    fn n(&self) -> usize {
        self.norms.len()
    }

    fn similar(&self, u: NodeId, v: NodeId) -> bool {
        self.cosine(u, v) > self.theta
    }

    fn counter(&self) -> &QueryCounter {
        &self.counter
    }
}

/// Sparse point with integer coordinates, entries sorted by dimension index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparsePoint {
    entries: Vec<(u32, i64)>,
}

impl SparsePoint {
    /// Zero-valued entries are dropped; duplicate indices are summed.
    pub fn new(entries: impl IntoIterator<Item = (u32, i64)>) -> Self {
        let mut entries: Vec<(u32, i64)> = entries.into_iter().collect();
        entries.sort_unstable_by_key(|e| e.0);
        let mut merged: Vec<(u32, i64)> = Vec::with_capacity(entries.len());
        for (i, x) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += x,
                _ => merged.push((i, x)),
            }
        }
        merged.retain(|e| e.1 != 0);
        SparsePoint { entries: merged }
    }

    pub fn entries(&self) -> &[(u32, i64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn l1(&self, other: &SparsePoint) -> i64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut d) = (0, 0, 0i64);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    d += a[i].1.abs();
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    d += b[j].1.abs();
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    d += (a[i].1 - b[j].1).abs();
                    i += 1;
                    j += 1;
                }
            }
        }
        d + a[i..].iter().map(|e| e.1.abs()).sum::<i64>() + b[j..].iter().map(|e| e.1.abs()).sum::<i64>()
    }
}

/// `p ~ q` iff `l1(p, q) <= 1`, computed exactly on integer coordinates.
#[derive(Debug)]
pub struct L1ThresholdOracle {
    points: Vec<SparsePoint>,
    counter: QueryCounter,
}

impl L1ThresholdOracle {
    pub fn new(points: Vec<SparsePoint>) -> Self {
        L1ThresholdOracle {
            points,
            counter: QueryCounter::default(),
        }
    }

    pub fn points(&self) -> &[SparsePoint] {
        &self.points
    }

    pub fn distance(&self, u: NodeId, v: NodeId) -> i64 {
        self.points[u.index()].l1(&self.points[v.index()])
    }
}

impl SimilarityOracle for L1ThresholdOracle {
    fn n(&self) -> usize {
        self.points.len()
    }

    fn similar(&self, u: NodeId, v: NodeId) -> bool {
        self.distance(u, v) <= 1
    }

    fn counter(&self) -> &QueryCounter {
        &self.counter
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(i: usize) -> NodeId {
        NodeId::from(i)
    }

    #[test]
    fn reflexive_and_counted() {
        let g = ExplicitGraph::empty(3);
        assert!(g.sim(id(1), id(1)));
        assert!(!g.sim(id(0), id(1)));
        assert_eq!(g.query_count(), 2);
    }

    #[test]
    fn explicit_lookup() {
        let g = ExplicitGraph::from_edges(3, [(0, 1)]).unwrap();
        assert!(g.sim(id(0), id(1)));
        assert!(g.sim(id(1), id(0)));
        assert!(!g.sim(id(1), id(2)));
    }

    #[test]
    fn explicit_drops_loops_and_duplicates() {
        let g = ExplicitGraph::from_edges(3, [(0, 1), (1, 0), (2, 2), (0, 1)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.degree(id(2)), 0);
    }

    #[test]
    fn out_of_range_is_argument_error() {
        let g = ExplicitGraph::empty(2);
        assert!(matches!(g.try_sim(id(0), id(2)), Err(Error::Argument(_))));
        assert!(ExplicitGraph::from_edges(2, [(0, 5)]).is_err());
    }

    #[test]
    fn degrees() {
        let g = ExplicitGraph::from_edges(4, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.degree(id(3)), 0);
        assert_eq!(g.degree(id(1)), 2);
    }

    #[test]
    fn l1_gadget_pair_distance() {
        // (4*1 + 1) o 0^l  versus  (4*1) o e_1^l
        let p = SparsePoint::new([(0, 5)]);
        let q = SparsePoint::new([(0, 4), (1, 1)]);
        assert_eq!(p.l1(&q), 2);
        let o = L1ThresholdOracle::new(vec![p, q]);
        assert!(!o.sim(id(0), id(1)));
    }

    #[test]
    fn l1_boundary_is_inclusive() {
        let o = L1ThresholdOracle::new(vec![SparsePoint::new([(0, 4)]), SparsePoint::new([(0, 4), (3, 1)])]);
        assert_eq!(o.distance(id(0), id(1)), 1);
        assert!(o.sim(id(0), id(1)));
    }

    #[test]
    fn embedding_threshold_extremes() {
        let rows: Vec<Vec<f32>> = (0..6)
            .map(|i| vec![1.0 + i as f32, 0.5 * i as f32, 2.0])
            .collect();
        let all = EmbeddingOracle::from_rows(&rows, -1.0).unwrap();
        let none = EmbeddingOracle::from_rows(&rows, 1.0).unwrap();
        for u in 0..6 {
            assert_eq!(all.degree(id(u)), 5);
            assert_eq!(none.degree(id(u)), 0);
        }
    }

    #[test]
    fn zero_vector_never_similar() {
        let o = EmbeddingOracle::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]], -1.0).unwrap();
        assert_eq!(o.cosine(id(0), id(1)), -1.0);
        assert!(!o.sim(id(0), id(1)));
        assert!(o.sim(id(0), id(0)));
    }

    #[test]
    fn embedding_dimension_mismatch() {
        assert!(EmbeddingOracle::from_rows(&[vec![1.0], vec![1.0, 2.0]], 0.0).is_err());
        assert!(EmbeddingOracle::new(3, vec![1.0; 4], 0.0).is_err());
    }

    #[test]
    fn degree_matches_exhaustive_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 40;
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(0.2) {
                    edges.push((u, v));
                }
            }
        }
        let g = ExplicitGraph::from_edges(n, edges).unwrap();
        for u in 0..n {
            let scan = (0..n).filter(|&v| v != u && g.sim(id(u), id(v))).count();
            assert_eq!(g.degree(id(u)), scan);
        }
    }

    #[test]
    fn counted_wrapper_tracks_its_own_calls() {
        let g = ExplicitGraph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let c = Counted::new(&g);
        let mut calls = 0u64;
        for u in 0..4 {
            for v in 0..4 {
                c.sim(id(u), id(v));
                calls += 1;
            }
        }
        assert_eq!(c.query_count(), calls);
        assert_eq!(g.query_count(), 0);
    }

    proptest! {
        #[test]
        fn sim_is_symmetric(seed in any::<u64>(), pairs in proptest::collection::vec((0usize..12, 0usize..12), 1..40)) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f32>> = (0..12).map(|_| (0..4).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).collect();
            let emb = EmbeddingOracle::from_rows(&rows, 0.1).unwrap();
            let edges: Vec<(usize, usize)> = (0..20).map(|_| (rng.gen_range(0..12), rng.gen_range(0..12))).collect();
            let g = ExplicitGraph::from_edges(12, edges).unwrap();
            let pts: Vec<SparsePoint> = (0..12).map(|_| SparsePoint::new([(0, rng.gen_range(0..3)), (rng.gen_range(1..4), rng.gen_range(-1..2))])).collect();
            let l1 = L1ThresholdOracle::new(pts);
            for (u, v) in pairs {
                let (u, v) = (id(u), id(v));
                prop_assert_eq!(emb.sim(u, v), emb.sim(v, u));
                prop_assert_eq!(g.sim(u, v), g.sim(v, u));
                prop_assert_eq!(l1.sim(u, v), l1.sim(v, u));
            }
        }
    }
}
