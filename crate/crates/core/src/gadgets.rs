//! INDEX and DISJ point sets under the ℓ₁-threshold similarity.
//!
//! Nodes are numbered in arrival order: Alice's points first, then Bob's.

use crate::error::{Error, Result};
use crate::similarity::{L1ThresholdOracle, SparsePoint};

/// INDEX instance for bits `x` and a 1-based query index `b`.
///
/// Alice holds `(4i + x_i) ∘ 0^ℓ` for `i = 1..ℓ`, Bob holds `(4b) ∘ e_i`.
/// The optimum is 0 when `x_b = 1` and `ℓ - 1` otherwise.
pub fn index_gadget(x: &[bool], b: usize) -> Result<(L1ThresholdOracle, u64)> {
    let l = x.len();
    if l < 2 {
        return Err(Error::arg(format!("INDEX needs at least 2 bits, got {l}")));
    }
    if b == 0 || b > l {
        return Err(Error::arg(format!("index b = {b} outside 1..={l}")));
    }
    let mut points = Vec::with_capacity(2 * l);
    for (i, &bit) in x.iter().enumerate() {
        points.push(SparsePoint::new([(0, 4 * (i as i64 + 1) + i64::from(bit))]));
    }
    for i in 1..=l {
        points.push(SparsePoint::new([(0, 4 * b as i64), (i as u32, 1)]));
    }
    let opt = if x[b - 1] { 0 } else { l as u64 - 1 };
    Ok((L1ThresholdOracle::new(points), opt))
}

/// DISJ instance for bit vectors `x` and `y` of equal length.
///
/// Points in arrival order are `a_i = (2i, x_i)`, `p_i = (2i, x_i - 1)`,
/// `b_i = (2i, 3 - y_i)`, `q_i = (2i, 4 - y_i)`. Each index with
/// `x_i = y_i = 1` forms a four-node path and costs exactly 1; the optimum is
/// the number of such indices.
pub fn disj_gadget(x: &[bool], y: &[bool]) -> Result<(L1ThresholdOracle, u64)> {
    if x.len() != y.len() {
        return Err(Error::arg(format!("DISJ inputs differ in length: {} vs {}", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::arg("DISJ needs at least 1 bit"));
    }
    let point = |i: usize, c: i64| SparsePoint::new([(0, 2 * (i as i64 + 1)), (1, c)]);
    let bit = |b: bool| i64::from(b);
    let mut points = Vec::with_capacity(4 * x.len());
    points.extend(x.iter().enumerate().map(|(i, &xi)| point(i, bit(xi))));
    points.extend(x.iter().enumerate().map(|(i, &xi)| point(i, bit(xi) - 1)));
    points.extend(y.iter().enumerate().map(|(i, &yi)| point(i, 3 - bit(yi))));
    points.extend(y.iter().enumerate().map(|(i, &yi)| point(i, 4 - bit(yi))));
    let opt = x.iter().zip(y).filter(|(&a, &b)| a && b).count() as u64;
    Ok((L1ThresholdOracle::new(points), opt))
}

/// Parses `1,0,1` or `101` into bits.
pub fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .filter(|c| *c != ',' && !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::arg(format!("bad bit `{c}` in `{s}`"))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{clustering_cost, opt_cost, Partition};
    use crate::similarity::{NodeId, SimilarityOracle};

    fn bits(v: u32, l: usize) -> Vec<bool> {
        (0..l).map(|i| v >> i & 1 == 1).collect()
    }

    #[test]
    fn index_examples() {
        let (g, opt) = index_gadget(&[true, true, true], 2).unwrap();
        assert_eq!(opt, 0);
        assert_eq!(g.n(), 6);
        let (_, opt) = index_gadget(&[false, false, false], 1).unwrap();
        assert_eq!(opt, 2);
        assert!(index_gadget(&[true, false], 0).is_err());
        assert!(index_gadget(&[true, false], 3).is_err());
        assert!(index_gadget(&[true], 1).is_err());
    }

    #[test]
    fn index_points_are_sparse() {
        let (g, _) = index_gadget(&bits(5, 6), 3).unwrap();
        assert!(g.points().iter().all(|p| p.nnz() <= 2));
    }

    #[test]
    fn index_set_bit_gives_empty_graph() {
        for l in 2..6 {
            for v in 0..1u32 << l {
                let x = bits(v, l);
                for b in (1..=l).filter(|&b| x[b - 1]) {
                    let (g, _) = index_gadget(&x, b).unwrap();
                    for u in 0..2 * l {
                        assert_eq!(g.degree(NodeId::from(u)), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn index_matches_brute_force() {
        for l in 2..=3 {
            for v in 0..1u32 << l {
                for b in 1..=l {
                    let (g, expected) = index_gadget(&bits(v, l), b).unwrap();
                    assert_eq!(opt_cost(&g).unwrap().0, expected);
                }
            }
        }
    }

    #[test]
    fn disj_examples() {
        let (_, opt) = disj_gadget(&[false; 3], &[false; 3]).unwrap();
        assert_eq!(opt, 0);
        let (g, opt) = disj_gadget(&[true, false], &[true, false]).unwrap();
        assert_eq!(opt, 1);
        assert_eq!(opt_cost(&g).unwrap().0, 1);
        assert!(disj_gadget(&[true], &[true, false]).is_err());
    }

    #[test]
    fn disj_intended_clustering() {
        for l in 1..=3 {
            for xv in 0..1u32 << l {
                for yv in 0..1u32 << l {
                    let (g, expected) = disj_gadget(&bits(xv, l), &bits(yv, l)).unwrap();
                    // a_i with p_i, b_i with q_i.
                    let labels: Vec<usize> = (0..4 * l).map(|u| (u / (2 * l)) * l + u % l).collect();
                    assert_eq!(clustering_cost(&g, &Partition::from_labels(&labels)).unwrap(), expected);
                }
            }
        }
    }

    #[test]
    fn bit_parsing() {
        assert_eq!(parse_bits("1,0,1").unwrap(), vec![true, false, true]);
        assert_eq!(parse_bits("01").unwrap(), vec![false, true]);
        assert!(parse_bits("2").is_err());
    }
}
