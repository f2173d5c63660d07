//! Seeded synthetic graphs.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::similarity::ExplicitGraph;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SyntheticSpec {
    Gnp { n: usize, p: f64 },
    /// `clusters` contiguous blocks of near-equal size.
    Planted { n: usize, clusters: usize, p_in: f64, p_out: f64 },
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::arg(format!("{name} must lie in [0, 1], got {p}")))
            }
        };
        match *self {
            SyntheticSpec::Gnp { p, .. } => prob("p", p),
            SyntheticSpec::Planted { clusters, p_in, p_out, .. } => {
                if clusters == 0 {
                    return Err(Error::arg("clusters must be at least 1"));
                }
                prob("p_in", p_in)?;
                prob("p_out", p_out)
            }
        }
    }

    pub fn n(&self) -> usize {
        match *self {
            SyntheticSpec::Gnp { n, .. } | SyntheticSpec::Planted { n, .. } => n,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<ExplicitGraph> {
        self.validate()?;
        match *self {
            SyntheticSpec::Gnp { n, p } => Ok(gnp(n, p, seed)),
            SyntheticSpec::Planted { n, clusters, p_in, p_out } => Ok(planted(n, clusters, p_in, p_out, seed)),
        }
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyntheticSpec::Gnp { n, p } => write!(f, "gnp:{n},{p}"),
            SyntheticSpec::Planted { n, clusters, p_in, p_out } => {
                write!(f, "planted:{n},{clusters},{p_in},{p_out}")
            }
        }
    }
}

/// `gnp:N,P` or `planted:N,C,PIN,POUT`.
impl FromStr for SyntheticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::arg(format!("graph spec `{s}`: expected gnp:N,P or planted:N,C,PIN,POUT"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        let int = |i: usize| parts[i].parse::<usize>().map_err(|_| bad());
        let real = |i: usize| parts[i].parse::<f64>().map_err(|_| bad());
        let spec = match (kind, parts.len()) {
            ("gnp", 2) => SyntheticSpec::Gnp { n: int(0)?, p: real(1)? },
            ("planted", 4) => SyntheticSpec::Planted {
                n: int(0)?,
                clusters: int(1)?,
                p_in: real(2)?,
                p_out: real(3)?,
            },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Calls `hit` for each index of `lo..hi` kept with probability `p`, using
/// geometric skips.
fn bernoulli_range(rng: &mut ChaCha8Rng, lo: usize, hi: usize, p: f64, mut hit: impl FnMut(usize)) {
    if p <= 0.0 || lo >= hi {
        return;
    }
    if p >= 1.0 {
        (lo..hi).for_each(hit);
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut i = lo;
    loop {
        let u: f64 = 1.0 - rng.gen::<f64>();
        let skip = (u.ln() / log_q).floor();
        if skip >= (hi - i) as f64 {
            return;
        }
        i += skip as usize;
        hit(i);
        i += 1;
        if i >= hi {
            return;
        }
    }
}

pub fn gnp(n: usize, p: f64, seed: u64) -> ExplicitGraph {
    planted(n, 1, p, 0.0, seed)
}

/// Block `c` holds nodes `[c·n/clusters, (c+1)·n/clusters)`.
pub fn planted(n: usize, clusters: usize, p_in: f64, p_out: f64, seed: u64) -> ExplicitGraph {
    let clusters = clusters.max(1);
    let block_end = |u: usize| {
        let c = u * clusters / n.max(1);
        ((c + 1) * n).div_ceil(clusters)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        let end = block_end(u).min(n);
        bernoulli_range(&mut rng, u + 1, end, p_in, |v| edges.push((u, v)));
        bernoulli_range(&mut rng, end, n, p_out, |v| edges.push((u, v)));
    }
    ExplicitGraph::from_edges(n, edges).expect("generated edges are in range")
}

/// Cluster index of `u` in [`planted`].
pub fn planted_label(u: usize, n: usize, clusters: usize) -> usize {
    u * clusters.max(1) / n.max(1)
}
