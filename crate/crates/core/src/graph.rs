//! Graph representation, file I/O, and synthetic multi-network generation.

use crate::error::{Error, Result};
use crate::measure::Measure;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// An undirected graph with optional node attributes.
///
/// Edges are stored once in canonical `(min, max)` order; the adjacency matrix
/// is symmetrized on access. Every node must have degree >= 1 (self-loops count).
#[derive(Debug, Clone)]
pub struct Graph {
    id: String,
    node_count: usize,
    edges: Vec<(usize, usize, f64)>,
    attributes: Option<Array2<f64>>,
}

impl Graph {
    pub fn new(
        id: impl Into<String>,
        node_count: usize,
        edges: Vec<(usize, usize, f64)>,
        attributes: Option<Array2<f64>>,
    ) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::Validation("graph must have at least one node".into()));
        }
        let mut canonical = Vec::with_capacity(edges.len());
        let mut seen = HashSet::new();
        for &(u, v, w) in &edges {
            if u >= node_count || v >= node_count {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) references a node outside [0, {node_count})"
                )));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) has invalid weight {w}"
                )));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(Error::Validation(format!(
                    "duplicate edge ({}, {})",
                    key.0, key.1
                )));
            }
            canonical.push((key.0, key.1, w));
        }
        let mut degree = vec![0usize; node_count];
        for &(u, v, _) in &canonical {
            degree[u] += 1;
            if v != u {
                degree[v] += 1;
            }
        }
        if let Some(node) = degree.iter().position(|&d| d == 0) {
            return Err(Error::Validation(format!("isolated node {node}")));
        }
        if let Some(attrs) = &attributes {
            if attrs.nrows() != node_count {
                return Err(Error::Validation(format!(
                    "attribute matrix has {} rows, expected {node_count}",
                    attrs.nrows()
                )));
            }
        }
        Ok(Self {
            id: id.into(),
            node_count,
            edges: canonical,
            attributes,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn attributes(&self) -> Option<&Array2<f64>> {
        self.attributes.as_ref()
    }

    pub fn attribute_dim(&self) -> Option<usize> {
        self.attributes.as_ref().map(|a| a.ncols())
    }

    /// Symmetric dense adjacency matrix.
    pub fn adjacency(&self) -> Array2<f64> {
        let n = self.node_count;
        let mut a = Array2::zeros((n, n));
        for &(u, v, w) in &self.edges {
            a[[u, v]] = w;
            a[[v, u]] = w;
        }
        a
    }

    pub fn degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.node_count];
        for &(u, v, w) in &self.edges {
            deg[u] += w;
            if v != u {
                deg[v] += w;
            }
        }
        deg
    }

    /// Discrete uniform node distribution.
    pub fn uniform_measure(&self) -> Measure {
        Measure::uniform(self.node_count).expect("node_count >= 1")
    }
}

/// `K` graphs to align jointly, with anchor tuples and optional ground truth.
///
/// Each anchor (or truth) tuple holds one node index per graph, ordered as the
/// graphs are ordered.
#[derive(Debug, Clone)]
pub struct MultiNetworkProblem {
    pub graphs: Vec<Graph>,
    pub anchor_sets: Vec<Vec<usize>>,
    pub ground_truth: Option<Vec<Vec<usize>>>,
}

impl MultiNetworkProblem {
    pub fn new(
        graphs: Vec<Graph>,
        anchor_sets: Vec<Vec<usize>>,
        ground_truth: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let k = graphs.len();
        if k < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 graphs, got {k}"
            )));
        }
        let dims: Vec<Option<usize>> = graphs.iter().map(|g| g.attribute_dim()).collect();
        if dims.iter().any(|d| d.is_some()) && dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Validation(
                "attribute dimensions must be identical across all graphs".into(),
            ));
        }
        let check_tuples = |tuples: &[Vec<usize>], what: &str| -> Result<()> {
            for (t, tuple) in tuples.iter().enumerate() {
                if tuple.len() != k {
                    return Err(Error::Validation(format!(
                        "{what} tuple {t} has {} entries, expected {k}",
                        tuple.len()
                    )));
                }
                for (i, &node) in tuple.iter().enumerate() {
                    if node >= graphs[i].node_count() {
                        return Err(Error::Validation(format!(
                            "{what} tuple {t} references node {node} outside graph {i}"
                        )));
                    }
                }
            }
            Ok(())
        };
        check_tuples(&anchor_sets, "anchor")?;
        if let Some(truth) = &ground_truth {
            check_tuples(truth, "ground-truth")?;
        }
        // No node may appear in two anchor tuples for the same graph.
        for i in 0..k {
            let mut seen = HashSet::new();
            for tuple in &anchor_sets {
                if !seen.insert(tuple[i]) {
                    return Err(Error::Validation(format!(
                        "node {} of graph {i} appears in two anchor tuples",
                        tuple[i]
                    )));
                }
            }
        }
        Ok(Self {
            graphs,
            anchor_sets,
            ground_truth,
        })
    }

    pub fn graph_count(&self) -> usize {
        self.graphs.len()
    }

    pub fn node_counts(&self) -> Vec<usize> {
        self.graphs.iter().map(|g| g.node_count()).collect()
    }

    /// Replace the anchor sets with a seeded random subset of the ground truth.
    pub fn select_anchors_from_truth(&mut self, count: usize, seed: u64) -> Result<()> {
        let truth = self.ground_truth.as_ref().ok_or_else(|| {
            Error::Validation("cannot draw anchors: no ground truth available".into())
        })?;
        if count > truth.len() {
            return Err(Error::Validation(format!(
                "requested {count} anchors but only {} truth tuples exist",
                truth.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut indices: Vec<usize> = (0..truth.len()).collect();
        indices.shuffle(&mut rng);
        indices.truncate(count);
        indices.sort_unstable();
        self.anchor_sets = indices.iter().map(|&i| truth[i].clone()).collect();
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

/// Load a graph from an edge-list file, optionally attaching CSV attributes.
///
/// Format: line 1 is `n m`, followed by `m` lines `u v` or `u v w`;
/// `#` starts a comment; indices are 0-based.
pub fn load_graph(path: impl AsRef<Path>, attr_path: Option<&Path>) -> Result<Graph> {
    let path = path.as_ref();
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "graph".to_string());
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);

    let mut header: Option<(usize, usize)> = None;
    let mut edges = Vec::new();
    for (lineno0, line) in reader.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = line?;
        let content = strip_comment(&line).trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if header.is_none() {
            if fields.len() != 2 {
                return Err(Error::Format {
                    line: lineno,
                    msg: format!("expected header 'n m', got '{content}'"),
                });
            }
            let n = fields[0].parse::<usize>().map_err(|e| Error::Format {
                line: lineno,
                msg: format!("bad node count '{}': {e}", fields[0]),
            })?;
            let m = fields[1].parse::<usize>().map_err(|e| Error::Format {
                line: lineno,
                msg: format!("bad edge count '{}': {e}", fields[1]),
            })?;
            header = Some((n, m));
            continue;
        }
        if fields.len() != 2 && fields.len() != 3 {
            return Err(Error::Format {
                line: lineno,
                msg: format!("expected 'u v' or 'u v w', got '{content}'"),
            });
        }
        let u = fields[0].parse::<usize>().map_err(|e| Error::Format {
            line: lineno,
            msg: format!("bad node index '{}': {e}", fields[0]),
        })?;
        let v = fields[1].parse::<usize>().map_err(|e| Error::Format {
            line: lineno,
            msg: format!("bad node index '{}': {e}", fields[1]),
        })?;
        let w = if fields.len() == 3 {
            fields[2].parse::<f64>().map_err(|e| Error::Format {
                line: lineno,
                msg: format!("bad edge weight '{}': {e}", fields[2]),
            })?
        } else {
            1.0
        };
        edges.push((u, v, w));
    }
    let (n, m) = header.ok_or(Error::Format {
        line: 1,
        msg: "empty graph file".into(),
    })?;
    if edges.len() != m {
        return Err(Error::Format {
            line: 1,
            msg: format!("header declares {m} edges but {} were found", edges.len()),
        });
    }
    let attributes = match attr_path {
        Some(p) => Some(load_attributes(p, n)?),
        None => None,
    };
    Graph::new(id, n, edges, attributes)
}

/// Load an `n x d` CSV attribute matrix (no header).
pub fn load_attributes(path: impl AsRef<Path>, expected_rows: usize) -> Result<Array2<f64>> {
    let file = std::fs::File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno0, line) in reader.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| Error::Format {
                    line: lineno,
                    msg: format!("bad attribute value '{}': {e}", s.trim()),
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Format {
                    line: lineno,
                    msg: format!(
                        "row has {} columns, expected {}",
                        row.len(),
                        first.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    if rows.len() != expected_rows {
        return Err(Error::Validation(format!(
            "attribute file has {} rows, expected {expected_rows}",
            rows.len()
        )));
    }
    let d = rows.first().map_or(0, |r| r.len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((expected_rows, d), flat)
        .map_err(|e| Error::Validation(format!("attribute shape error: {e}")))
}

pub fn write_graph(graph: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    writeln!(out, "{} {}", graph.node_count(), graph.edge_count())?;
    for &(u, v, w) in graph.edges() {
        if (w - 1.0).abs() < f64::EPSILON {
            writeln!(out, "{u} {v}")?;
        } else {
            writeln!(out, "{u} {v} {w}")?;
        }
    }
    Ok(())
}

/// Load anchor or ground-truth tuples: CSV, one row per tuple, `K` columns.
pub fn load_tuples(path: impl AsRef<Path>, k: usize) -> Result<Vec<Vec<usize>>> {
    let file = std::fs::File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut tuples = Vec::new();
    for (lineno0, line) in reader.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tuple: Vec<usize> = line
            .split(',')
            .map(|s| {
                s.trim().parse::<usize>().map_err(|e| Error::Format {
                    line: lineno,
                    msg: format!("bad node index '{}': {e}", s.trim()),
                })
            })
            .collect::<Result<_>>()?;
        if tuple.len() != k {
            return Err(Error::Format {
                line: lineno,
                msg: format!("tuple has {} entries, expected {k}", tuple.len()),
            });
        }
        tuples.push(tuple);
    }
    Ok(tuples)
}

pub fn write_tuples(tuples: &[Vec<usize>], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    for tuple in tuples {
        let row: Vec<String> = tuple.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic ER generation
// ---------------------------------------------------------------------------

const ER_BASE_ATTEMPTS: usize = 100;

/// Generate `k` noisy permuted copies of one connected ER base graph.
///
/// Each copy is an independent node permutation of the base, with
/// `ceil(insert_frac * m)` random new edges inserted and then
/// `ceil(remove_frac * m')` random edges removed (`m'` counted after
/// insertion). Removals that would isolate a node are re-drawn. The returned
/// problem carries the permutation tuples as ground truth; anchor sets start
/// empty (see [`MultiNetworkProblem::select_anchors_from_truth`]).
pub fn generate_noisy_er(
    n: usize,
    p: f64,
    k: usize,
    insert_frac: f64,
    remove_frac: f64,
    seed: u64,
) -> Result<MultiNetworkProblem> {
    if n < 2 {
        return Err(Error::Validation("ER generation needs n >= 2".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Validation(format!("edge probability {p} not in (0, 1)")));
    }
    if !(0.0..1.0).contains(&insert_frac) || !(0.0..1.0).contains(&remove_frac) {
        return Err(Error::Validation(
            "insert_frac and remove_frac must lie in [0, 1)".into(),
        ));
    }
    if k < 2 {
        return Err(Error::Validation("need k >= 2 copies".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let base = sample_connected_er(n, p, &mut rng)?;
    let m = base.len();

    let mut graphs = Vec::with_capacity(k);
    let mut permutations: Vec<Vec<usize>> = Vec::with_capacity(k);
    for copy in 0..k {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut edges: Vec<(usize, usize)> = base
            .iter()
            .map(|&(u, v)| canonical(perm[u], perm[v]))
            .collect();
        let mut edge_set: HashSet<(usize, usize)> = edges.iter().copied().collect();

        let insert_count = (insert_frac * m as f64).ceil() as usize;
        insert_random_edges(n, insert_count, &mut edges, &mut edge_set, &mut rng)?;

        let remove_count = (remove_frac * edges.len() as f64).ceil() as usize;
        remove_random_edges(n, remove_count, &mut edges, &mut rng)?;

        edges.sort_unstable();
        let weighted: Vec<(usize, usize, f64)> =
            edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        graphs.push(Graph::new(format!("er-{copy}"), n, weighted, None)?);
        permutations.push(perm);
    }

    let ground_truth: Vec<Vec<usize>> = (0..n)
        .map(|base_node| permutations.iter().map(|perm| perm[base_node]).collect())
        .collect();
    MultiNetworkProblem::new(graphs, Vec::new(), Some(ground_truth))
}

fn canonical(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

fn sample_connected_er(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    for _ in 0..ER_BASE_ATTEMPTS {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        if is_connected(n, &edges) {
            return Ok(edges);
        }
    }
    Err(Error::Generation(format!(
        "no connected ER({n}, {p}) base after {ER_BASE_ATTEMPTS} attempts"
    )))
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    if n == 0 {
        return false;
    }
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

fn insert_random_edges(
    n: usize,
    count: usize,
    edges: &mut Vec<(usize, usize)>,
    edge_set: &mut HashSet<(usize, usize)>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let max_edges = n * (n - 1) / 2;
    if edge_set.len() + count > max_edges {
        return Err(Error::Generation(format!(
            "cannot insert {count} edges: graph would exceed {max_edges} undirected edges"
        )));
    }
    let mut inserted = 0;
    while inserted < count {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v {
            continue;
        }
        let key = canonical(u, v);
        if edge_set.insert(key) {
            edges.push(key);
            inserted += 1;
        }
    }
    Ok(())
}

fn remove_random_edges(
    n: usize,
    count: usize,
    edges: &mut Vec<(usize, usize)>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let mut degree = vec![0usize; n];
    for &(u, v) in edges.iter() {
        degree[u] += 1;
        degree[v] += 1;
    }
    let attempt_budget = 1000 + 200 * count;
    let mut removed = 0;
    let mut attempts = 0;
    while removed < count {
        attempts += 1;
        if attempts > attempt_budget {
            return Err(Error::Generation(format!(
                "could not remove {count} edges without isolating a node \
                 ({removed} removed after {attempts} attempts)"
            )));
        }
        if edges.is_empty() {
            return Err(Error::Generation("ran out of edges to remove".into()));
        }
        let idx = rng.gen_range(0..edges.len());
        let (u, v) = edges[idx];
        if degree[u] <= 1 || degree[v] <= 1 {
            continue; // would isolate an endpoint; re-draw
        }
        edges.swap_remove(idx);
        degree[u] -= 1;
        degree[v] -= 1;
        removed += 1;
    }
    Ok(())
}
