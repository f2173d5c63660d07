//! Exact offline mismatch semantics: mismatch pairs, the `(A, B)` node
//! partition induced by a reference set, cluster extraction and exact
//! `|E_mis|`, `|E_mis_A|`, `|E_mis_B|`.

use crate::clustering::{find_pivot, pruned_pivot_clustering, Clustering, ReferenceSet};
use crate::error::{Error, Result};
use crate::rank::RankFunction;
use crate::similarity::{NodeId, SimilarityOracle};

/// Largest `n` accepted by the quadratic pair scans.
pub const EXACT_PAIR_LIMIT: usize = 5000;

/// `(u, v)` is a mismatch if it is similar but split, or dissimilar but
/// co-clustered.
pub fn is_mismatch(u: NodeId, v: NodeId, clustering: &Clustering, oracle: &dyn SimilarityOracle) -> Result<bool> {
    if u == v {
        return Err(Error::arg(format!("mismatch test needs distinct nodes, got ({u}, {u})")));
    }
    Ok(oracle.sim(u, v) != (clustering.pivot(u) == clustering.pivot(v)))
}

/// `A` = nodes whose pivot is determinable from `R`; `B` = the rest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbPartition {
    in_a: Vec<bool>,
}

impl AbPartition {
    #[inline]
    pub fn is_a(&self, u: NodeId) -> bool {
        self.in_a[u.index()]
    }

    pub fn a(&self) -> Vec<NodeId> {
        self.select(true)
    }

    pub fn b(&self) -> Vec<NodeId> {
        self.select(false)
    }

    fn select(&self, side: bool) -> Vec<NodeId> {
        self.in_a
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == side)
            .map(|(u, _)| NodeId::from(u))
            .collect()
    }
}

pub fn partition_ab(n: usize, rf: &RankFunction, reference: &ReferenceSet, k: usize, oracle: &dyn SimilarityOracle) -> AbPartition {
    let in_a = (0..n)
        .map(|u| find_pivot(NodeId::from(u), rf, reference, k, oracle).is_some())
        .collect();
    AbPartition { in_a }
}

/// `Clu(u)`: `u` with the neighbours it pivots, or empty if `u` is not a pivot.
pub fn clu(u: NodeId, clustering: &Clustering, oracle: &dyn SimilarityOracle) -> Vec<NodeId> {
    if clustering.pivot(u) != u {
        return Vec::new();
    }
    let mut members: Vec<NodeId> = oracle
        .neighbors(u)
        .into_iter()
        .filter(|&v| clustering.pivot(v) == u)
        .collect();
    members.push(u);
    members.sort_unstable();
    members
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MismatchCounts {
    pub total: u64,
    pub in_a: u64,
    pub in_b: u64,
}

/// PrunedPivot clustering and `(A, B)` partition for one `(π, R, k)`.
pub struct MismatchGraph<'a> {
    oracle: &'a dyn SimilarityOracle,
    clustering: Clustering,
    partition: AbPartition,
}

impl<'a> MismatchGraph<'a> {
    pub fn new(oracle: &'a dyn SimilarityOracle, rf: &RankFunction, reference: &ReferenceSet, k: usize) -> Self {
        let clustering = pruned_pivot_clustering(oracle, rf, k);
        let partition = partition_ab(oracle.n(), rf, reference, k, oracle);
        MismatchGraph {
            oracle,
            clustering,
            partition,
        }
    }

    pub fn clustering(&self) -> &Clustering {
        &self.clustering
    }

    pub fn partition(&self) -> &AbPartition {
        &self.partition
    }

    pub fn is_mismatch(&self, u: NodeId, v: NodeId) -> bool {
        u != v && self.oracle.similar(u, v) != (self.clustering.pivot(u) == self.clustering.pivot(v))
    }

    /// Membership in `E_mis_A`: a mismatch with at least one end in `A`.
    pub fn in_a(&self, u: NodeId, v: NodeId) -> bool {
        self.is_mismatch(u, v) && (self.partition.is_a(u) || self.partition.is_a(v))
    }

    pub fn in_b(&self, u: NodeId, v: NodeId) -> bool {
        self.is_mismatch(u, v) && !self.partition.is_a(u) && !self.partition.is_a(v)
    }

    pub fn counts(&self) -> MismatchCounts {
        let n = self.oracle.n();
        let mut c = MismatchCounts::default();
        for u in 0..n {
            for v in u + 1..n {
                let (u, v) = (NodeId::from(u), NodeId::from(v));
                if self.is_mismatch(u, v) {
                    c.total += 1;
                    if self.partition.is_a(u) || self.partition.is_a(v) {
                        c.in_a += 1;
                    } else {
                        c.in_b += 1;
                    }
                }
            }
        }
        c
    }
}

/// Exhaustive pair scan under the PrunedPivot clustering, split by `(A, B)`.
pub fn exact_mismatch_counts(
    oracle: &dyn SimilarityOracle,
    rf: &RankFunction,
    reference: &ReferenceSet,
    k: usize,
) -> Result<MismatchCounts> {
    if oracle.n() > EXACT_PAIR_LIMIT {
        return Err(Error::Capacity(format!(
            "exact mismatch scan limited to n <= {EXACT_PAIR_LIMIT}, got {}",
            oracle.n()
        )));
    }
    Ok(MismatchGraph::new(oracle, rf, reference, k).counts())
}
