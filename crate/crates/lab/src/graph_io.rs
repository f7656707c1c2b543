//! Plain edge-list graphs: one `u v` pair per line, `#` starts a comment.

use std::path::Path;

use anyhow::{bail, Context, Result};
use qubus_core::graphstab::GraphSpec;

/// Parses an edge list; `vertices` defaults to one more than the largest index.
pub fn parse_edge_list(text: &str, vertices: Option<usize>) -> Result<GraphSpec> {
    let mut edges = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            bail!("line {}: expected `u v`, got `{raw}`", no + 1);
        }
        let u: usize = fields[0].parse().with_context(|| format!("line {}: bad vertex", no + 1))?;
        let v: usize = fields[1].parse().with_context(|| format!("line {}: bad vertex", no + 1))?;
        edges.push((u, v));
    }
    let n = match vertices {
        Some(n) => n,
        None => edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0),
    };
    Ok(GraphSpec::new(n, &edges)?)
}

pub fn read_edge_list(path: &Path, vertices: Option<usize>) -> Result<GraphSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_edge_list(&text, vertices)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_display() {
        let g = parse_edge_list("# path\n0 1\n1 2  # middle\n\n2 3\n", None).unwrap();
        assert_eq!(g, GraphSpec::chain(4));
        assert_eq!(parse_edge_list(&g.to_string(), Some(4)).unwrap(), g);
        assert_eq!(parse_edge_list("0 1\n", Some(3)).unwrap().vertex_count(), 3);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_edge_list("0 1 2\n", None).is_err());
        assert!(parse_edge_list("0 x\n", None).is_err());
        assert!(parse_edge_list("0 0\n", None).is_err());
        assert!(parse_edge_list("0 5\n", Some(3)).is_err());
    }
}
