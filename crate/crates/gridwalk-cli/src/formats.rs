//! Plain-text instance formats and their canonical serialization.
//!
//! Three headers are recognized, all with zero-based indices and decimal
//! weights:
//!
//! ```text
//! matrix m n nnz      sets n m            graph n e
//! i j w               j1 j2 j3 ...        u v
//! ...                 ...                 ...
//! ```
//!
//! Every parse error names the 1-based line it occurred on. Serialization
//! is canonical (entries sorted, shortest round-trip decimals), so
//! parse → serialize → parse is the identity.

use std::collections::HashMap;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use gridwalk_core::{ConstraintMatrix, Graph, SetSystem};

/// A parsed instance file.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    /// Weighted constraint rows over columns.
    Matrix(ConstraintMatrix),
    /// A set system over a ground set.
    Sets(SetSystem),
    /// An undirected graph.
    Graph(Graph),
}

fn parse_count(token: &str, what: &str, line: usize) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| anyhow!("line {line}: {what} must be a nonnegative integer, got `{token}`"))
}

/// Parse an instance from text. Errors carry the offending line number.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| anyhow!("empty input: expected a header line"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    match tokens.first().copied() {
        Some("matrix") => {
            if tokens.len() != 4 {
                bail!("line 1: matrix header must be `matrix m n nnz`");
            }
            let m = parse_count(tokens[1], "row count", 1)?;
            let n = parse_count(tokens[2], "column count", 1)?;
            let nnz = parse_count(tokens[3], "entry count", 1)?;
            let mut triplets = Vec::with_capacity(nnz);
            let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
            let mut taken = 0usize;
            for (idx, line) in lines.by_ref() {
                let lno = idx + 1;
                if line.trim().is_empty() {
                    continue;
                }
                if taken == nnz {
                    bail!("line {lno}: expected {nnz} entries but found more content");
                }
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.len() != 3 {
                    bail!("line {lno}: matrix entry must be `i j w`");
                }
                let i = parse_count(t[0], "row index", lno)?;
                let j = parse_count(t[1], "column index", lno)?;
                let w: f64 = t[2]
                    .parse()
                    .map_err(|_| anyhow!("line {lno}: weight `{}` is not a number", t[2]))?;
                if i >= m {
                    bail!("line {lno}: row index {i} out of range (must be < {m})");
                }
                if j >= n {
                    bail!("line {lno}: column index {j} out of range (must be < {n})");
                }
                if !w.is_finite() || w <= 0.0 {
                    bail!("line {lno}: weight must be finite and > 0, got {w}");
                }
                if let Some(first) = seen.insert((i, j), lno) {
                    bail!(
                        "line {lno}: duplicate entry ({i}, {j}) — first given at line {first}"
                    );
                }
                triplets.push((i, j, w));
                taken += 1;
            }
            if taken != nnz {
                bail!("expected {nnz} matrix entries but found {taken}");
            }
            Ok(Instance::Matrix(
                ConstraintMatrix::from_triplets(m, n, &triplets)
                    .map_err(|e| anyhow!("{e}"))?,
            ))
        }
        Some("sets") => {
            if tokens.len() != 3 {
                bail!("line 1: sets header must be `sets n m`");
            }
            let n = parse_count(tokens[1], "ground size", 1)?;
            let m = parse_count(tokens[2], "set count", 1)?;
            let mut sets: Vec<Vec<u32>> = Vec::with_capacity(m);
            for (idx, line) in lines.by_ref() {
                let lno = idx + 1;
                if sets.len() == m {
                    if line.trim().is_empty() {
                        continue;
                    }
                    bail!("line {lno}: expected {m} set lines but found more content");
                }
                let mut set = Vec::new();
                for t in line.split_whitespace() {
                    let j = parse_count(t, "element index", lno)?;
                    if j >= n {
                        bail!(
                            "line {lno}: element index {j} out of range (must be < {n})"
                        );
                    }
                    set.push(j as u32);
                }
                let mut sorted = set.clone();
                sorted.sort_unstable();
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    let d = sorted.windows(2).find(|w| w[0] == w[1]).unwrap()[0];
                    bail!("line {lno}: duplicate element {d} within the set");
                }
                sets.push(set);
            }
            if sets.len() != m {
                bail!("expected {m} set lines but found {}", sets.len());
            }
            Ok(Instance::Sets(
                SetSystem::new(n, sets).map_err(|e| anyhow!("{e}"))?,
            ))
        }
        Some("graph") => {
            if tokens.len() != 3 {
                bail!("line 1: graph header must be `graph n e`");
            }
            let n = parse_count(tokens[1], "vertex count", 1)?;
            let e = parse_count(tokens[2], "edge count", 1)?;
            let mut edges = Vec::with_capacity(e);
            let mut seen: HashMap<(u32, u32), usize> = HashMap::new();
            for (idx, line) in lines.by_ref() {
                let lno = idx + 1;
                if line.trim().is_empty() {
                    continue;
                }
                if edges.len() == e {
                    bail!("line {lno}: expected {e} edges but found more content");
                }
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.len() != 2 {
                    bail!("line {lno}: edge must be `u v`");
                }
                let u = parse_count(t[0], "vertex index", lno)? as u32;
                let v = parse_count(t[1], "vertex index", lno)? as u32;
                if u as usize >= n || v as usize >= n {
                    bail!(
                        "line {lno}: vertex index {} out of range (must be < {n})",
                        u.max(v)
                    );
                }
                if u == v {
                    bail!("line {lno}: self-loop at vertex {u} is not allowed");
                }
                let key = (u.min(v), u.max(v));
                if let Some(first) = seen.insert(key, lno) {
                    bail!(
                        "line {lno}: duplicate edge ({}, {}) — first given at line {first}",
                        key.0,
                        key.1
                    );
                }
                edges.push((u, v));
            }
            if edges.len() != e {
                bail!("expected {e} edges but found {}", edges.len());
            }
            Ok(Instance::Graph(
                Graph::from_edges(n, &edges).map_err(|e| anyhow!("{e}"))?,
            ))
        }
        Some(other) => bail!(
            "line 1: unknown header `{other}` (expected `matrix`, `sets`, or `graph`)"
        ),
        None => bail!("line 1: empty header"),
    }
}

/// Canonical text form of an instance (sorted entries, shortest decimals).
pub fn serialize_instance(instance: &Instance) -> String {
    let mut out = String::new();
    match instance {
        Instance::Matrix(m) => {
            let _ = writeln!(out, "matrix {} {} {}", m.rows(), m.cols(), m.nnz());
            for i in 0..m.rows() {
                let view = m.row(i);
                for (idx, &c) in view.cols.iter().enumerate() {
                    let _ = writeln!(out, "{i} {c} {}", view.values[idx]);
                }
            }
        }
        Instance::Sets(s) => {
            let _ = writeln!(out, "sets {} {}", s.ground_size(), s.num_sets());
            for set in s.sets() {
                let line: Vec<String> = set.iter().map(|j| j.to_string()).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        Instance::Graph(g) => {
            let n = g.vertex_count();
            let mut edges = Vec::new();
            for u in 0..n {
                for &v in g.neighbors(u) {
                    if (v as usize) > u {
                        edges.push((u as u32, v));
                    }
                }
            }
            let _ = writeln!(out, "graph {} {}", n, edges.len());
            for (u, v) in edges {
                let _ = writeln!(out, "{u} {v}");
            }
        }
    }
    out
}

/// Parse a one-number-per-line vector (budget files, q files).
pub fn parse_vector(text: &str, what: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t
            .parse()
            .with_context(|| format!("line {}: {what} `{t}` is not a number", idx + 1))?;
        out.push(v);
    }
    Ok(out)
}

/// One value per line, shortest round-trip decimals (integers print bare).
pub fn format_values(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 2);
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}
