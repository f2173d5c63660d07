//! Pivot-based clustering: offline `Pivot`, recursive `PrunedPivot`,
//! reference-set restricted `FindPivot`, and the multi-pass streaming
//! `PrunedPivot`.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::rank::{RankFunction, RankKey};
use crate::similarity::{NodeId, SimilarityOracle};
use crate::stream::{run_multiplexed, Accounting, Meter, NodeStream, PassConsumer, RunOptions};

/// Stored highest-ranked nodes, kept in ascending key order (best first).
#[derive(Clone, Debug, Default)]
pub struct ReferenceSet {
    members: Vec<RankKey>,
}

impl ReferenceSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Arbitrary member set; used for fixtures such as `R = V`.
    pub fn from_nodes(rf: &RankFunction, nodes: impl IntoIterator<Item = NodeId>) -> Self {
        let mut members: Vec<RankKey> = nodes.into_iter().map(|u| rf.key(u)).collect();
        members.sort_unstable();
        members.dedup();
        ReferenceSet { members }
    }

    /// The `min(r, n)` highest-ranked nodes of `[0, n)`, computed offline.
    pub fn top(rf: &RankFunction, n: usize, r: usize) -> Self {
        let mut members: Vec<RankKey> = (0..n).map(|u| rf.key(NodeId::from(u))).collect();
        members.sort_unstable();
        members.truncate(r);
        ReferenceSet { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn keys(&self) -> &[RankKey] {
        &self.members
    }

    /// Members from highest to lowest rank.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.members.iter().map(|k| k.node)
    }

    pub fn contains_key(&self, key: &RankKey) -> bool {
        self.members.binary_search(key).is_ok()
    }

    /// Words to hold the set: one node id and one rank key per member.
    pub fn words(&self) -> u64 {
        2 * self.members.len() as u64
    }
}

/// One-pass builder keeping the `r` smallest keys in a bounded max-heap.
pub struct ReferenceSetBuilder<'a> {
    rf: &'a RankFunction,
    r: usize,
    heap: BinaryHeap<RankKey>,
    done: Option<ReferenceSet>,
}

impl<'a> ReferenceSetBuilder<'a> {
    pub fn new(rf: &'a RankFunction, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::param("reference set capacity must be at least 1"));
        }
        Ok(ReferenceSetBuilder {
            rf,
            r,
            heap: BinaryHeap::with_capacity(r.min(1 << 20)),
            done: None,
        })
    }

    /// The finished set; `None` before the pass ends.
    pub fn take(&mut self) -> Option<ReferenceSet> {
        self.done.take()
    }
}

impl PassConsumer for ReferenceSetBuilder<'_> {
    fn name(&self) -> &str {
        "reference-set"
    }

    fn passes(&self) -> usize {
        1
    }

    fn on_item(&mut self, item: NodeId, meter: &mut Meter) -> Result<()> {
        let key = self.rf.key(item);
        if self.heap.len() < self.r {
            self.heap.push(key);
            meter.census(2)?;
        } else if self.heap.peek().is_some_and(|top| key < *top) {
            self.heap.pop();
            self.heap.push(key);
        }
        Ok(())
    }

    fn end_pass(&mut self, _pass: usize, _meter: &mut Meter) -> Result<()> {
        let members = std::mem::take(&mut self.heap).into_sorted_vec();
        self.done = Some(ReferenceSet { members });
        Ok(())
    }
}

/// Builds `R` in one pass over `stream`.
pub fn build_reference_set(stream: &NodeStream, rf: &RankFunction, r: usize) -> Result<(ReferenceSet, Accounting)> {
    let mut builder = ReferenceSetBuilder::new(rf, r)?;
    let acc = run_multiplexed(stream, &mut [&mut builder], RunOptions::default())?;
    Ok((builder.take().expect("builder ran its pass"), acc))
}

/// Node to pivot map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clustering {
    pivot_of: Vec<NodeId>,
}

impl Clustering {
    pub fn from_pivots(pivot_of: Vec<NodeId>) -> Result<Self> {
        let n = pivot_of.len();
        for (u, &p) in pivot_of.iter().enumerate() {
            if p.index() >= n {
                return Err(Error::arg(format!("pivot {p} of node {u} out of range")));
            }
            if pivot_of[p.index()] != p {
                return Err(Error::arg(format!("pivot {p} of node {u} is not self-pivoting")));
            }
        }
        Ok(Clustering { pivot_of })
    }

    pub fn n(&self) -> usize {
        self.pivot_of.len()
    }

    #[inline]
    pub fn pivot(&self, u: NodeId) -> NodeId {
        self.pivot_of[u.index()]
    }

    pub fn pivots(&self) -> &[NodeId] {
        &self.pivot_of
    }

    /// Clusters as sorted blocks, ordered by smallest member.
    pub fn blocks(&self) -> Vec<Vec<NodeId>> {
        let mut by_pivot: Vec<Vec<NodeId>> = vec![Vec::new(); self.n()];
        for (u, &p) in self.pivot_of.iter().enumerate() {
            by_pivot[p.index()].push(NodeId::from(u));
        }
        let mut blocks: Vec<Vec<NodeId>> = by_pivot.into_iter().filter(|b| !b.is_empty()).collect();
        blocks.sort_unstable_by_key(|b| b[0]);
        blocks
    }
}

/// Classic Pivot: nodes in rank order; an unassigned node becomes a pivot and
/// claims its unassigned neighbours.
pub fn pivot_offline(oracle: &dyn SimilarityOracle, rf: &RankFunction) -> Clustering {
    let n = oracle.n();
    let mut pivot_of: Vec<Option<NodeId>> = vec![None; n];
    for u in rf.sorted(n) {
        if pivot_of[u.index()].is_some() {
            continue;
        }
        pivot_of[u.index()] = Some(u);
        for v in oracle.neighbors(u) {
            pivot_of[v.index()].get_or_insert(u);
        }
    }
    Clustering {
        pivot_of: pivot_of.into_iter().map(|p| p.expect("every node assigned")).collect(),
    }
}

/// Recursive PrunedPivot with a global budget of `k` recursive calls.
/// Returns `u` itself when the budget runs out.
pub fn pruned_pivot_offline(oracle: &dyn SimilarityOracle, rf: &RankFunction, k: usize, u: NodeId) -> NodeId {
    // None means the budget was exhausted somewhere below.
    fn resolve(
        oracle: &dyn SimilarityOracle,
        rf: &RankFunction,
        k: usize,
        calls: &mut usize,
        u: NodeId,
    ) -> Option<NodeId> {
        if *calls >= k {
            return None;
        }
        let mut higher: Vec<NodeId> = oracle
            .neighbors(u)
            .into_iter()
            .filter(|&v| rf.rank_less(v, u))
            .collect();
        higher.sort_by_cached_key(|&v| rf.key(v));
        for v in higher {
            *calls += 1;
            match resolve(oracle, rf, k, calls, v) {
                None => return None,
                Some(p) if p == v => return Some(v),
                Some(_) => {}
            }
        }
        Some(u)
    }
    let mut calls = 0;
    resolve(oracle, rf, k, &mut calls, u).unwrap_or(u)
}

/// PrunedPivot pivots for every node.
pub fn pruned_pivot_clustering(oracle: &dyn SimilarityOracle, rf: &RankFunction, k: usize) -> Clustering {
    let pivot_of = (0..oracle.n())
        .map(|u| pruned_pivot_offline(oracle, rf, k, NodeId::from(u)))
        .collect();
    Clustering { pivot_of }
}

/// Outcome of [`find_pivot_traced`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotSearch {
    /// Pivot found inside `R`.
    Found(NodeId),
    /// Budget exhausted; the node is a singleton.
    TimedOut,
    /// Pivot not determinable from `R`.
    Undetermined,
}

impl PivotSearch {
    pub fn pivot(self, u: NodeId) -> Option<NodeId> {
        match self {
            PivotSearch::Found(p) => Some(p),
            PivotSearch::TimedOut => Some(u),
            PivotSearch::Undetermined => None,
        }
    }
}

/// FindPivot restricted to the reference set.
///
/// Only `R` members are ever compared against `u`, so this needs no stream
/// access and no storage beyond `R` and the recursion.
pub fn find_pivot_traced(
    u: NodeId,
    rf: &RankFunction,
    reference: &ReferenceSet,
    k: usize,
    oracle: &dyn SimilarityOracle,
) -> PivotSearch {
    enum Step {
        Pivot(NodeId),
        Timeout,
        Null,
    }

    fn search(
        u: NodeId,
        rf: &RankFunction,
        reference: &ReferenceSet,
        k: usize,
        oracle: &dyn SimilarityOracle,
        calls: &mut usize,
    ) -> Step {
        if *calls >= k {
            return Step::Timeout;
        }
        let ku = rf.key(u);
        // Members with key <= key(u), best first; u itself comes last if stored.
        for kv in reference.keys().iter().take_while(|kv| **kv <= ku) {
            let v = kv.node;
            if v == u {
                return Step::Pivot(u);
            }
            if !oracle.sim(u, v) {
                continue;
            }
            *calls += 1;
            match search(v, rf, reference, k, oracle, calls) {
                Step::Timeout => return Step::Timeout,
                Step::Pivot(p) if p == v => return Step::Pivot(v),
                _ => {}
            }
        }
        Step::Null
    }

    let mut calls = 0;
    match search(u, rf, reference, k, oracle, &mut calls) {
        Step::Pivot(p) => PivotSearch::Found(p),
        Step::Timeout => PivotSearch::TimedOut,
        Step::Null => PivotSearch::Undetermined,
    }
}

/// `pivot(u)` when determinable from `R` (a timeout counts as `u`), else
/// `None`.
pub fn find_pivot(
    u: NodeId,
    rf: &RankFunction,
    reference: &ReferenceSet,
    k: usize,
    oracle: &dyn SimilarityOracle,
) -> Option<NodeId> {
    find_pivot_traced(u, rf, reference, k, oracle).pivot(u)
}

/// Streaming PrunedPivot for one query node, using at most `k` passes and
/// a query path of at most `k + 1` entries.
///
/// Each path entry `(x, y)` holds a node `x` on the query path and `y`, the
/// next candidate for `x`: its best-ranked neighbour ranked below the next
/// path node and above `x` (or `x` itself if there is none).
pub struct PrunedPivotStream<'a> {
    u: NodeId,
    k: usize,
    rf: &'a RankFunction,
    oracle: &'a dyn SimilarityOracle,
    path: Vec<(NodeId, NodeId)>,
    result: Option<NodeId>,
    words: i64,
}

impl<'a> PrunedPivotStream<'a> {
    /// `u` must already be held in memory when the first pass starts.
    pub fn new(u: NodeId, rf: &'a RankFunction, k: usize, oracle: &'a dyn SimilarityOracle) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        Ok(PrunedPivotStream {
            u,
            k,
            rf,
            oracle,
            path: Vec::new(),
            result: None,
            words: 0,
        })
    }

    pub fn node(&self) -> NodeId {
        self.u
    }

    pub fn result(&self) -> Option<NodeId> {
        self.result
    }

    pub fn is_done(&self) -> bool {
        self.result.is_some()
    }

    pub fn path_len(&self) -> usize {
        self.path.len()
    }

    fn set_path_words(&mut self, meter: &mut Meter) -> Result<()> {
        let words = 2 * self.path.len() as i64;
        meter.census(words - self.words)?;
        self.words = words;
        Ok(())
    }

    fn finish(&mut self, pivot: NodeId, meter: &mut Meter) -> Result<()> {
        self.result = Some(pivot);
        self.path = Vec::new();
        self.set_path_words(meter)
    }

    /// Releases the result word once the caller has consumed it.
    pub fn release(&mut self, meter: &mut Meter) -> Result<()> {
        if self.result.is_some() {
            meter.census(-1)?;
        }
        Ok(())
    }
}

impl PassConsumer for PrunedPivotStream<'_> {
    fn name(&self) -> &str {
        "pruned-pivot"
    }

    fn passes(&self) -> usize {
        self.k
    }

    fn begin_pass(&mut self, pass: usize, meter: &mut Meter) -> Result<()> {
        if pass == 1 {
            // Result slot.
            meter.census(1)?;
            self.path = vec![(self.u, self.u)];
            self.set_path_words(meter)?;
        }
        Ok(())
    }

    #[inline]
    fn on_item(&mut self, item: NodeId, _meter: &mut Meter) -> Result<()> {
        if self.result.is_some() {
            return Ok(());
        }
        let key = self.rf.key(item);
        for i in 0..self.path.len() {
            let (x, y) = self.path[i];
            if key >= self.rf.key(y) {
                continue;
            }
            if let Some(&(next, _)) = self.path.get(i + 1) {
                if key <= self.rf.key(next) {
                    continue;
                }
            }
            if self.oracle.sim(x, item) {
                self.path[i].1 = item;
            }
        }
        Ok(())
    }

    fn end_pass(&mut self, pass: usize, meter: &mut Meter) -> Result<()> {
        if self.result.is_some() {
            return Ok(());
        }
        // Resolve bottom-up: a path node without further candidates is a
        // pivot, and its predecessor joins it.
        while let Some(&(x, y)) = self.path.last() {
            if x != y {
                break;
            }
            if self.path.len() <= 2 {
                return self.finish(x, meter);
            }
            self.path.truncate(self.path.len() - 2);
        }
        let last = self.path.len() - 1;
        let (x, y) = self.path[last];
        self.path[last] = (x, x);
        self.path.push((y, y));
        if pass == self.k {
            // Budget exhausted: singleton.
            return self.finish(self.u, meter);
        }
        self.set_path_words(meter)
    }
}

/// Runs streaming PrunedPivot for a single node.
pub fn pruned_pivot_stream(
    stream: &NodeStream,
    u: NodeId,
    rf: &RankFunction,
    k: usize,
    oracle: &dyn SimilarityOracle,
) -> Result<(NodeId, Accounting)> {
    let mut pp = PrunedPivotStream::new(u, rf, k, oracle)?;
    let acc = run_multiplexed(stream, &mut [&mut pp], RunOptions::default())?;
    Ok((pp.result().expect("resolved within k passes"), acc))
}
