//! Edge-list and embedding files, and gadget point output.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::similarity::{EmbeddingOracle, ExplicitGraph, SparsePoint};

/// Parses an edge list: optional `n <count>` header, then one `u v` pair per
/// line. Blank lines and `#` comments are skipped; self-loops and
/// duplicates are dropped. Without a header, `n` is the largest id plus one.
pub fn parse_edge_list(reader: impl BufRead, path: &Path) -> Result<ExplicitGraph> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut declared: Option<usize> = None;
    let mut edges = Vec::new();
    let mut max_id: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields[0] == "n" {
            if declared.is_some() || !edges.is_empty() {
                return Err(err(lineno, "header must be the first entry".into()));
            }
            let [_, count] = fields[..] else {
                return Err(err(lineno, format!("expected `n <count>`, got `{text}`")));
            };
            declared = Some(count.parse().map_err(|_| err(lineno, format!("bad node count `{count}`")))?);
            continue;
        }
        let [a, b] = fields[..] else {
            return Err(err(lineno, format!("expected two node ids, got `{text}`")));
        };
        let id = |s: &str| s.parse::<usize>().map_err(|_| err(lineno, format!("bad node id `{s}`")));
        let (u, v) = (id(a)?, id(b)?);
        if let Some(n) = declared {
            if u >= n || v >= n {
                return Err(err(lineno, format!("node id out of range for n = {n}")));
            }
        }
        max_id = Some(max_id.unwrap_or(0).max(u).max(v));
        edges.push((u, v));
    }
    let n = declared.unwrap_or_else(|| max_id.map_or(0, |m| m + 1));
    ExplicitGraph::from_edges(n, edges)
}

pub fn read_edge_list(path: &Path) -> Result<ExplicitGraph> {
    parse_edge_list(BufReader::new(File::open(path)?), path)
}

/// Writes the `n` header and every edge once, `u < v`.
pub fn write_edge_list(graph: &ExplicitGraph, mut out: impl Write) -> Result<()> {
    use crate::similarity::SimilarityOracle;
    writeln!(out, "n {}", graph.n())?;
    for (u, v) in graph.edges() {
        writeln!(out, "{u} {v}")?;
    }
    out.flush()?;
    Ok(())
}

/// Little-endian `u64 n`, `u64 dim`, then `n·dim` `f32` values row-major.
pub fn parse_embeddings(mut reader: impl Read, theta: f64) -> Result<EmbeddingOracle> {
    let mut header = [0u8; 16];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::Format("embedding file shorter than its 16-byte header".into()))?;
    let n = u64::from_le_bytes(header[..8].try_into().expect("8 bytes"));
    let dim = u64::from_le_bytes(header[8..].try_into().expect("8 bytes"));
    let expected = n
        .checked_mul(dim)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::Format(format!("embedding size {n} x {dim} overflows")))?;
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    if body.len() as u64 != expected {
        return Err(Error::Format(format!(
            "embedding body has {} bytes, header {n} x {dim} needs {expected}",
            body.len()
        )));
    }
    let data: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    EmbeddingOracle::new(dim as usize, data, theta)
}

pub fn read_embeddings(path: &Path, theta: f64) -> Result<EmbeddingOracle> {
    parse_embeddings(BufReader::new(File::open(path)?), theta)
}

pub fn write_embeddings(rows: &[Vec<f32>], mut out: impl Write) -> Result<()> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Format("rows differ in dimension".into()));
    }
    out.write_all(&(rows.len() as u64).to_le_bytes())?;
    out.write_all(&(dim as u64).to_le_bytes())?;
    for x in rows.iter().flatten() {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// One point per line as space-separated `index:value` entries.
pub fn write_points(points: &[SparsePoint], mut out: impl Write) -> Result<()> {
    for p in points {
        let entries: Vec<String> = p.entries().iter().map(|(i, v)| format!("{i}:{v}")).collect();
        writeln!(out, "{}", entries.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

/// Output file, or stdout when `path` is `None`.
pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::{NodeId, SimilarityOracle};

    fn parse(text: &str) -> Result<ExplicitGraph> {
        parse_edge_list(text.as_bytes(), Path::new("mem"))
    }

    #[test]
    fn edge_list_basics() {
        let g = parse("0 1\n\n0 1\n").unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.edge_count(), 1);
        let g = parse("n 5\n0 1\n2 2\n# comment\n3 4 # trailing\n").unwrap();
        assert_eq!(g.n(), 5);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(parse("").unwrap().n(), 0);
    }

    #[test]
    fn edge_list_errors_carry_line_numbers() {
        for (text, line) in [("0 1\nx 2\n", 2), ("n 3\n0 5\n", 2), ("0 1 2\n", 1), ("0 1\nn 4\n", 2)] {
            match parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let g = crate::generate::gnp(40, 0.2, 3);
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        let h = parse_edge_list(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(g.n(), h.n());
        for u in 0..40 {
            for v in 0..40 {
                let (u, v) = (NodeId::from(u), NodeId::from(v));
                assert_eq!(g.sim(u, v), h.sim(u, v));
            }
        }
    }

    #[test]
    fn embeddings_round_trip() {
        let rows = vec![vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0]];
        let mut buf = Vec::new();
        write_embeddings(&rows, &mut buf).unwrap();
        let e = parse_embeddings(buf.as_slice(), 0.5).unwrap();
        assert_eq!(e.n(), 3);
        assert!(e.sim(NodeId(0), NodeId(1)));
        assert!(!e.sim(NodeId(0), NodeId(2)));
        let none = parse_embeddings(buf.as_slice(), 1.0).unwrap();
        assert_eq!(ExplicitGraph::from_oracle(&none).edge_count(), 0);
    }

    #[test]
    fn embeddings_size_mismatch() {
        let mut buf = Vec::new();
        write_embeddings(&[vec![1.0, 2.0]], &mut buf).unwrap();
        buf.pop();
        assert!(matches!(parse_embeddings(buf.as_slice(), 0.0), Err(Error::Format(_))));
        assert!(matches!(parse_embeddings(&[0u8; 4][..], 0.0), Err(Error::Format(_))));
    }

    #[test]
    fn points_output() {
        let mut buf = Vec::new();
        write_points(&[SparsePoint::new([(0, 5)]), SparsePoint::new([(0, 4), (2, 1)])], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0:5\n0:4 2:1\n");
    }
}
