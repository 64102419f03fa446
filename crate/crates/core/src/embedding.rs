//! Random-walk-with-restart positional embeddings and the position-aware
//! cross-cost constructions.

use crate::error::{Error, Result};
use crate::graph::{Graph, MultiNetworkProblem};
use crate::tensor::strides;
use ndarray::{Array1, Array2, ArrayD};

const RWR_TOL: f64 = 1e-8;

/// Column-stochastic walk matrix: the transpose of the row-normalized adjacency.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    matrix: Array2<f64>,
}

impl TransitionMatrix {
    pub fn from_graph(g: &Graph) -> Result<Self> {
        let n = g.node_count();
        let adj = g.adjacency();
        let deg = g.degrees();
        if let Some(node) = deg.iter().position(|&d| d <= 0.0) {
            return Err(Error::Validation(format!(
                "node {node} has zero degree; walk matrix undefined"
            )));
        }
        let mut matrix = Array2::zeros((n, n));
        for u in 0..n {
            for v in 0..n {
                // column u holds the out-distribution of node u
                matrix[[v, u]] = adj[[u, v]] / deg[u];
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

/// RWR fixed point `r = (1 - beta) W r + beta e_anchor`, solved by fixed-point
/// iteration to L1 residual <= 1e-8. The result lies in the probability simplex.
pub fn rwr_scores(g: &Graph, anchor_node: usize, beta: f64) -> Result<Array1<f64>> {
    let walk = TransitionMatrix::from_graph(g)?;
    rwr_scores_with(&walk, anchor_node, beta)
}

pub fn rwr_scores_with(
    walk: &TransitionMatrix,
    anchor_node: usize,
    beta: f64,
) -> Result<Array1<f64>> {
    let n = walk.n();
    if anchor_node >= n {
        return Err(Error::Validation(format!(
            "anchor node {anchor_node} outside [0, {n})"
        )));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Validation(format!(
            "restart probability {beta} not in (0, 1]"
        )));
    }
    let mut restart = Array1::zeros(n);
    restart[anchor_node] = beta;

    let cap = if beta >= 1.0 {
        1
    } else {
        (10.0 * (RWR_TOL.ln() / (1.0 - beta).ln()).ceil()).max(10.0) as usize
    };
    let mut r = Array1::zeros(n);
    r[anchor_node] = 1.0;
    for _ in 0..cap {
        let next = walk.matrix().dot(&r) * (1.0 - beta) + &restart;
        let residual: f64 = next.iter().zip(r.iter()).map(|(a, b)| (a - b).abs()).sum();
        r = next;
        if residual <= RWR_TOL {
            return Ok(r);
        }
    }
    // One more application to measure the residual at the returned point.
    let image = walk.matrix().dot(&r) * (1.0 - beta) + &restart;
    let residual: f64 = image.iter().zip(r.iter()).map(|(a, b)| (a - b).abs()).sum();
    if residual <= RWR_TOL {
        Ok(r)
    } else {
        Err(Error::Numerical(format!(
            "RWR did not converge within {cap} iterations (residual {residual:.3e})"
        )))
    }
}

/// Per-graph node embeddings in the unified anchor space.
///
/// Column `p` of the positional block corresponds to anchor tuple `p` for every
/// graph, so rows of different graphs live in one comparable space.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    embeddings: Vec<Array2<f64>>,
    positional_width: usize,
    attributes_concatenated: bool,
}

impl EmbeddingSet {
    pub fn embeddings(&self) -> &[Array2<f64>] {
        &self.embeddings
    }

    pub fn embedding(&self, graph: usize) -> &Array2<f64> {
        &self.embeddings[graph]
    }

    /// Positional (RWR) block of graph `i`, shape `n_i x |L|`.
    pub fn positional(&self, graph: usize) -> Array2<f64> {
        let z = &self.embeddings[graph];
        let d = z.ncols() - self.positional_width;
        z.slice(ndarray::s![.., d..]).to_owned()
    }

    pub fn positional_width(&self) -> usize {
        self.positional_width
    }

    pub fn attributes_concatenated(&self) -> bool {
        self.attributes_concatenated
    }

    pub fn width(&self) -> usize {
        self.embeddings[0].ncols()
    }
}

/// Build unified embeddings `Z_i = [X_i || R_i]` (or `Z_i = R_i` for plain
/// graphs), where column `p` of `R_i` is the RWR vector of anchor tuple `p`.
pub fn build_embeddings(
    problem: &MultiNetworkProblem,
    beta: f64,
    use_attributes: bool,
) -> Result<EmbeddingSet> {
    let l = problem.anchor_sets.len();
    if l == 0 {
        return Err(Error::Validation(
            "at least one anchor tuple is required to build embeddings".into(),
        ));
    }
    if use_attributes {
        if let Some(i) = problem.graphs.iter().position(|g| g.attributes().is_none()) {
            return Err(Error::Config(format!(
                "attributes requested but graph {i} has none"
            )));
        }
    }
    let mut embeddings = Vec::with_capacity(problem.graph_count());
    for (i, g) in problem.graphs.iter().enumerate() {
        let walk = TransitionMatrix::from_graph(g)?;
        let n = g.node_count();
        let mut positional = Array2::zeros((n, l));
        for (p, tuple) in problem.anchor_sets.iter().enumerate() {
            let r = rwr_scores_with(&walk, tuple[i], beta)?;
            positional.column_mut(p).assign(&r);
        }
        let z = if use_attributes {
            let attrs = g.attributes().expect("checked above");
            let mut z = Array2::zeros((n, attrs.ncols() + l));
            z.slice_mut(ndarray::s![.., ..attrs.ncols()]).assign(attrs);
            z.slice_mut(ndarray::s![.., attrs.ncols()..]).assign(&positional);
            z
        } else {
            positional
        };
        embeddings.push(z);
    }
    Ok(EmbeddingSet {
        embeddings,
        positional_width: l,
        attributes_concatenated: use_attributes,
    })
}

fn row_distance(a: &Array2<f64>, i: usize, b: &Array2<f64>, j: usize) -> f64 {
    a.row(i)
        .iter()
        .zip(b.row(j).iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Position-aware cost tensor restricted to the supplied node lists:
/// entry `(v_1, ..., v_K)` is the sum of pairwise Euclidean embedding
/// distances over all graph pairs `j < k`.
pub fn cost_tensor(embeddings: &EmbeddingSet, node_lists: &[Vec<usize>]) -> Result<ArrayD<f64>> {
    let k = node_lists.len();
    if k != embeddings.embeddings().len() {
        return Err(Error::Validation(format!(
            "{} node lists supplied for {} graphs",
            k,
            embeddings.embeddings().len()
        )));
    }
    for (i, list) in node_lists.iter().enumerate() {
        if list.is_empty() {
            return Err(Error::Validation(format!("node list {i} is empty")));
        }
        let n = embeddings.embedding(i).nrows();
        if let Some(&bad) = list.iter().find(|&&v| v >= n) {
            return Err(Error::Validation(format!(
                "node {bad} outside graph {i} (n={n})"
            )));
        }
    }
    // Pairwise distance matrices between the restricted rows, then assembled
    // into the dense tensor in one pass.
    let shape: Vec<usize> = node_lists.iter().map(|l| l.len()).collect();
    let mut pair_costs: Vec<Vec<Array2<f64>>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut row = Vec::with_capacity(k);
        for kk in 0..k {
            if kk <= j {
                row.push(Array2::zeros((0, 0)));
                continue;
            }
            let mut d = Array2::zeros((shape[j], shape[kk]));
            for (a, &va) in node_lists[j].iter().enumerate() {
                for (b, &vb) in node_lists[kk].iter().enumerate() {
                    d[[a, b]] = row_distance(
                        embeddings.embedding(j),
                        va,
                        embeddings.embedding(kk),
                        vb,
                    );
                }
            }
            row.push(d);
        }
        pair_costs.push(row);
    }
    let st = strides(&shape);
    let total: usize = shape.iter().product();
    let mut data = vec![0.0; total];
    for (flat, slot) in data.iter_mut().enumerate() {
        let mut sum = 0.0;
        for j in 0..k {
            let ij = (flat / st[j]) % shape[j];
            for kk in (j + 1)..k {
                let ik = (flat / st[kk]) % shape[kk];
                sum += pair_costs[j][kk][[ij, ik]];
            }
        }
        *slot = sum;
    }
    Ok(ArrayD::from_shape_vec(shape, data).unwrap())
}

/// Dense Euclidean distance matrix between the rows of two feature matrices.
pub fn cross_cost_matrix(features_a: &Array2<f64>, features_b: &Array2<f64>) -> Result<Array2<f64>> {
    if features_a.ncols() != features_b.ncols() {
        return Err(Error::Validation(format!(
            "feature dimension mismatch: {} vs {}",
            features_a.ncols(),
            features_b.ncols()
        )));
    }
    let mut d = Array2::zeros((features_a.nrows(), features_b.nrows()));
    for i in 0..features_a.nrows() {
        for j in 0..features_b.nrows() {
            d[[i, j]] = row_distance(features_a, i, features_b, j);
        }
    }
    Ok(d)
}

/// Full-tensor convenience wrapper used by tests: every node of every graph.
pub fn full_node_lists(embeddings: &EmbeddingSet) -> Vec<Vec<usize>> {
    embeddings
        .embeddings()
        .iter()
        .map(|z| (0..z.nrows()).collect())
        .collect()
}

#[allow(dead_code)]
fn brute_force_cost_entry(embeddings: &EmbeddingSet, tuple: &[usize]) -> f64 {
    let k = tuple.len();
    let mut sum = 0.0;
    for j in 0..k {
        for kk in (j + 1)..k {
            sum += row_distance(
                embeddings.embedding(j),
                tuple[j],
                embeddings.embedding(kk),
                tuple[kk],
            );
        }
    }
    sum
}
