//! Clustering cost and the brute-force optimum.

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::similarity::{NodeId, SimilarityOracle};

/// Largest `n` accepted by [`opt_cost`].
pub const OPT_LIMIT: usize = 13;

/// Disjoint covering blocks of `[0, n)`, stored canonically: members sorted,
/// blocks ordered by their smallest member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<NodeId>>,
}

impl Partition {
    pub fn from_blocks(n: usize, blocks: Vec<Vec<NodeId>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for b in &blocks {
            for &u in b {
                if u.index() >= n {
                    return Err(Error::arg(format!("node {u} out of range for n = {n}")));
                }
                if std::mem::replace(&mut seen[u.index()], true) {
                    return Err(Error::arg(format!("node {u} appears in two blocks")));
                }
            }
        }
        if let Some(u) = seen.iter().position(|&s| !s) {
            return Err(Error::arg(format!("node {u} not covered")));
        }
        let mut blocks: Vec<Vec<NodeId>> = blocks.into_iter().filter(|b| !b.is_empty()).collect();
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Partition { blocks })
    }

    /// Nodes with equal labels share a block.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut ids: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        let mut blocks: Vec<Vec<NodeId>> = Vec::new();
        for (u, &l) in labels.iter().enumerate() {
            let b = *ids.entry(l).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(NodeId::from(u));
        }
        Partition { blocks }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            blocks: (0..n).map(|u| vec![NodeId::from(u)]).collect(),
        }
    }

    pub fn blocks(&self) -> &[Vec<NodeId>] {
        &self.blocks
    }

    pub fn n(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Block index of every node.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.n()];
        for (b, block) in self.blocks.iter().enumerate() {
            for &u in block {
                labels[u.index()] = b;
            }
        }
        labels
    }
}

impl From<&Clustering> for Partition {
    fn from(c: &Clustering) -> Self {
        Partition { blocks: c.blocks() }
    }
}

/// Similar pairs split apart plus dissimilar pairs kept together.
pub fn clustering_cost(oracle: &dyn SimilarityOracle, partition: &Partition) -> Result<u64> {
    if partition.n() != oracle.n() {
        return Err(Error::arg(format!(
            "partition covers {} nodes, oracle has {}",
            partition.n(),
            oracle.n()
        )));
    }
    Ok(cost_by_labels(oracle, &partition.labels()))
}

/// Cost of a pivot clustering.
pub fn pivot_cost(oracle: &dyn SimilarityOracle, clustering: &Clustering) -> u64 {
    let labels: Vec<usize> = clustering.pivots().iter().map(|p| p.index()).collect();
    cost_by_labels(oracle, &labels)
}

// cost = sum_b C(|b|, 2) - inside + (edges - inside)
fn cost_by_labels(oracle: &dyn SimilarityOracle, labels: &[usize]) -> u64 {
    let n = labels.len();
    let mut sizes = vec![0u64; n.max(labels.iter().copied().max().map_or(0, |m| m + 1))];
    for &l in labels {
        sizes[l] += 1;
    }
    let pairs_inside: u64 = sizes.iter().map(|&s| s * s.saturating_sub(1) / 2).sum();
    let (mut edges, mut inside) = (0u64, 0u64);
    for u in 0..n {
        for v in oracle.neighbors(NodeId::from(u)) {
            if v.index() > u {
                edges += 1;
                inside += u64::from(labels[v.index()] == labels[u]);
            }
        }
    }
    pairs_inside - inside + (edges - inside)
}

/// Minimum clustering cost by restricted-growth-string enumeration with
/// incremental costs and branch-and-bound.
pub fn opt_cost(oracle: &dyn SimilarityOracle) -> Result<(u64, Partition)> {
    let n = oracle.n();
    if n > OPT_LIMIT {
        return Err(Error::Capacity(format!("brute-force optimum limited to n <= {OPT_LIMIT}, got {n}")));
    }
    let adj: Vec<u32> = (0..n)
        .map(|u| {
            (0..n)
                .filter(|&v| u != v && oracle.similar(NodeId::from(u), NodeId::from(v)))
                .fold(0, |mask, v| mask | 1 << v)
        })
        .collect();
    let edges: u32 = adj.iter().map(|a| a.count_ones()).sum::<u32>() / 2;

    struct Search<'a> {
        adj: &'a [u32],
        n: usize,
        labels: Vec<usize>,
        blocks: Vec<u32>,
        best: u64,
        best_labels: Vec<usize>,
    }

    impl Search<'_> {
        fn go(&mut self, i: usize, cost: u64) {
            if cost >= self.best {
                return;
            }
            if i == self.n {
                self.best = cost;
                self.best_labels.clone_from(&self.labels);
                return;
            }
            let before: u32 = (1u32 << i) - 1;
            let nbrs = self.adj[i] & before;
            let open = self.blocks.len();
            for b in 0..=open {
                let mask = if b < open { self.blocks[b] } else { 0 };
                let inc = (nbrs & !mask).count_ones() + (!self.adj[i] & before & mask).count_ones();
                if b == open {
                    self.blocks.push(0);
                }
                self.blocks[b] |= 1 << i;
                self.labels[i] = b;
                self.go(i + 1, cost + u64::from(inc));
                self.blocks[b] &= !(1 << i);
                if b == open {
                    self.blocks.pop();
                }
            }
        }
    }

    let mut s = Search {
        adj: &adj,
        n,
        labels: vec![0; n],
        blocks: Vec::new(),
        // All singletons costs exactly the edge count; +1 so it is reachable.
        best: u64::from(edges) + 1,
        best_labels: (0..n).collect(),
    };
    s.go(0, 0);
    Ok((s.best, Partition::from_labels(&s.best_labels)))
}
