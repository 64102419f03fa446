//! End-to-end orchestration: embeddings, consensus clustering, per-cluster
//! node alignment, block-diagonal assembly, and the `.aln` file format.

use crate::embedding::{build_embeddings, cost_tensor};
use crate::error::{Error, Result};
use crate::fgw::{assign_clusters, barycenter_bcd, ClusterAlignment};
use crate::graph::MultiNetworkProblem;
use crate::measure::Measure;
use crate::mfgw::{solve_node_alignment, MfgwProblem};
use crate::sinkhorn::SolverConfig;
use ndarray::ArrayD;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

pub const DEFAULT_ELEMENT_BUDGET: usize = 50_000_000;
pub const DEFAULT_EMIT_THRESHOLD: f64 = 1e-9;
/// Auto cluster rule: one cluster per 50 nodes of the largest graph.
pub const AUTO_CLUSTER_DIVISOR: usize = 50;

/// Full run configuration; serialized into every output artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub solver: SolverConfig,
    /// RWR restart probability.
    pub beta: f64,
    /// Cluster count M; `None` selects ceil(max n_i / 50).
    pub clusters: Option<usize>,
    pub seed: u64,
    /// Cap on any single cluster's coupling tensor size.
    pub element_budget: usize,
    /// Worker threads for per-cluster solves; `None` uses the rayon default.
    pub workers: Option<usize>,
    /// Concatenate node attributes into embeddings when all graphs have them.
    pub use_attributes: bool,
    /// Smallest coupling entry written to alignment files.
    pub emit_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            beta: 0.15,
            clusters: None,
            seed: 0,
            element_budget: DEFAULT_ELEMENT_BUDGET,
            workers: None,
            use_attributes: false,
            emit_threshold: DEFAULT_EMIT_THRESHOLD,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta {} not in (0, 1]", self.beta)));
        }
        if self.clusters == Some(0) {
            return Err(Error::Config("cluster count must be positive".into()));
        }
        if self.element_budget == 0 {
            return Err(Error::Config("element budget must be positive".into()));
        }
        if !(self.emit_threshold >= 0.0) {
            return Err(Error::Config("emit threshold must be nonnegative".into()));
        }
        Ok(())
    }

    /// Effective cluster count for the given node counts.
    pub fn resolve_clusters(&self, node_counts: &[usize]) -> usize {
        let max_n = node_counts.iter().copied().max().unwrap_or(1);
        let min_n = node_counts.iter().copied().min().unwrap_or(1);
        let m = self
            .clusters
            .unwrap_or_else(|| max_n.div_ceil(AUTO_CLUSTER_DIVISOR));
        m.clamp(1, min_n)
    }
}

/// One cluster's solved coupling over its member nodes.
#[derive(Debug, Clone)]
pub struct AlignmentBlock {
    pub cluster: usize,
    /// Global node ids per graph, ascending; axis order matches.
    pub members: Vec<Vec<usize>>,
    pub tensor: ArrayD<f64>,
    pub objective_trace: Vec<f64>,
    pub marginal_error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    pub embeddings_secs: f64,
    pub barycenter_secs: f64,
    pub solve_secs: f64,
    pub total_secs: f64,
}

/// Block-diagonal K-way alignment: the conceptual global tensor assigns the
/// stored entry to tuples inside one cluster and zero to every other tuple.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    pub blocks: Vec<AlignmentBlock>,
    /// `cluster_of[i][v]` is the cluster of node `v` in graph `i`.
    pub cluster_of: Vec<Vec<usize>>,
    /// `slot_of[i][v]` is `v`'s axis position inside its block tensor.
    pub slot_of: Vec<Vec<usize>>,
    pub node_counts: Vec<usize>,
    pub config: PipelineConfig,
    pub barycenter_trace: Vec<f64>,
    pub timings: Timings,
}

impl AlignmentResult {
    pub fn graph_count(&self) -> usize {
        self.node_counts.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.blocks.len()
    }

    /// Total dense elements across all block tensors.
    pub fn allocated_elements(&self) -> usize {
        self.blocks.iter().map(|b| b.tensor.len()).sum()
    }

    /// Score of a global node tuple: the block entry when all nodes share a
    /// cluster, zero otherwise.
    pub fn lookup_score(&self, tuple: &[usize]) -> Result<f64> {
        let k = self.graph_count();
        if tuple.len() != k {
            return Err(Error::Validation(format!(
                "tuple has {} entries, expected {k}",
                tuple.len()
            )));
        }
        for (i, &v) in tuple.iter().enumerate() {
            if v >= self.node_counts[i] {
                return Err(Error::Validation(format!(
                    "node {v} outside graph {i} (n={})",
                    self.node_counts[i]
                )));
            }
        }
        let cluster = self.cluster_of[0][tuple[0]];
        if (1..k).any(|i| self.cluster_of[i][tuple[i]] != cluster) {
            return Ok(0.0);
        }
        let idx: Vec<usize> = tuple
            .iter()
            .enumerate()
            .map(|(i, &v)| self.slot_of[i][v])
            .collect();
        Ok(self.blocks[cluster].tensor[ndarray::IxDyn(&idx)])
    }

    /// Header metadata without timings; byte-identical across reruns with the
    /// same inputs and seed.
    pub fn metadata_json(&self) -> serde_json::Value {
        serde_json::json!({
            "format": "hot-aln",
            "k": self.graph_count(),
            "m": self.cluster_count(),
            "seed": self.config.seed,
            "node_counts": self.node_counts,
            "allocated_elements": self.allocated_elements(),
            "config": self.config,
            "clusters": self.blocks.iter().map(|b| &b.members).collect::<Vec<_>>(),
        })
    }
}

fn solve_block(
    cluster: usize,
    members: Vec<Vec<usize>>,
    embeddings: &crate::embedding::EmbeddingSet,
    adjacencies: &[ndarray::Array2<f64>],
    config: &PipelineConfig,
) -> Result<AlignmentBlock> {
    if members.iter().all(|m| m.len() == 1) {
        // A one-node-per-graph cluster has a single feasible coupling.
        let shape = vec![1usize; members.len()];
        let tensor = ArrayD::from_elem(shape, 1.0);
        return Ok(AlignmentBlock {
            cluster,
            members,
            tensor,
            objective_trace: vec![0.0],
            marginal_error: 0.0,
            converged: true,
        });
    }
    let base_cost = cost_tensor(embeddings, &members)?;
    let intra_costs: Vec<ndarray::Array2<f64>> = members
        .iter()
        .zip(adjacencies)
        .map(|(list, a)| {
            let mut sub = ndarray::Array2::zeros((list.len(), list.len()));
            for (x, &u) in list.iter().enumerate() {
                for (y, &v) in list.iter().enumerate() {
                    sub[[x, y]] = a[[u, v]];
                }
            }
            sub
        })
        .collect();
    let marginals: Vec<Measure> = members
        .iter()
        .map(|list| Measure::uniform(list.len()))
        .collect::<Result<_>>()?;
    let problem = MfgwProblem {
        base_cost,
        intra_costs,
        marginals,
        config: config.solver.clone(),
    };
    let outcome = solve_node_alignment(&problem)
        .map_err(|e| Error::Numerical(format!("cluster {cluster} node alignment: {e}")))?;
    Ok(AlignmentBlock {
        cluster,
        members,
        tensor: outcome.coupling.tensor,
        objective_trace: outcome.objective_trace,
        marginal_error: outcome.coupling.marginal_error,
        converged: outcome.converged,
    })
}

/// Run the full hierarchical alignment: RWR embeddings, consensus-graph
/// clustering, then one multi-marginal solve per cluster.
pub fn hot_align(problem: &MultiNetworkProblem, config: &PipelineConfig) -> Result<AlignmentResult> {
    config.validate()?;
    if problem.anchor_sets.is_empty() {
        return Err(Error::Validation("alignment requires at least one anchor tuple".into()));
    }
    let total_start = Instant::now();
    let k = problem.graph_count();
    let node_counts = problem.node_counts();

    let stage = Instant::now();
    let use_attrs =
        config.use_attributes && problem.graphs.iter().all(|g| g.attributes().is_some());
    let embeddings = build_embeddings(problem, config.beta, use_attrs)
        .map_err(|e| e.tag_stage("embeddings"))?;
    let embeddings_secs = stage.elapsed().as_secs_f64();

    let stage = Instant::now();
    let m = config.resolve_clusters(&node_counts);
    let adjacencies: Vec<ndarray::Array2<f64>> =
        problem.graphs.iter().map(|g| g.adjacency()).collect();
    let measures: Vec<Measure> = problem.graphs.iter().map(|g| g.uniform_measure()).collect();
    let (clustering, barycenter_trace) = if m == 1 {
        let assignment: Vec<Vec<usize>> = node_counts.iter().map(|&n| vec![0; n]).collect();
        let members = vec![node_counts.iter().map(|&n| (0..n).collect()).collect()];
        (
            ClusterAlignment {
                assignment,
                members,
            },
            Vec::new(),
        )
    } else {
        let features: Vec<ndarray::Array2<f64>> = (0..k)
            .map(|i| embeddings.embedding(i).to_owned())
            .collect();
        let state = barycenter_bcd(
            &features,
            &adjacencies,
            &measures,
            m,
            &config.solver,
            config.seed,
        )
        .map_err(|e| e.tag_stage("barycenter"))?;
        let trace = state.objective_trace.clone();
        (assign_clusters(&state), trace)
    };
    let barycenter_secs = stage.elapsed().as_secs_f64();

    // Fail fast if any cluster's coupling tensor would blow the budget.
    for (j, cluster_members) in clustering.members.iter().enumerate() {
        let mut elements = 1usize;
        let mut overflow = false;
        for list in cluster_members {
            match elements.checked_mul(list.len()) {
                Some(v) => elements = v,
                None => {
                    overflow = true;
                    break;
                }
            }
        }
        if overflow || elements > config.element_budget {
            return Err(Error::Capacity(format!(
                "cluster {j} needs {} coupling elements, over the budget {}; \
                 raise the cluster count (--clusters) to shrink per-cluster tensors",
                if overflow {
                    "more than usize::MAX".to_string()
                } else {
                    elements.to_string()
                },
                config.element_budget
            )));
        }
    }

    let stage = Instant::now();
    let solve_one = |(j, members): (usize, Vec<Vec<usize>>)| {
        solve_block(j, members, &embeddings, &adjacencies, config)
    };
    let indexed: Vec<(usize, Vec<Vec<usize>>)> =
        clustering.members.iter().cloned().enumerate().collect();
    let blocks: Vec<AlignmentBlock> = match config.workers {
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
            pool.install(|| {
                use rayon::prelude::*;
                indexed.into_par_iter().map(solve_one).collect::<Result<_>>()
            })?
        }
        None => {
            use rayon::prelude::*;
            indexed.into_par_iter().map(solve_one).collect::<Result<_>>()?
        }
    };
    let solve_secs = stage.elapsed().as_secs_f64();

    let mut slot_of: Vec<Vec<usize>> = node_counts.iter().map(|&n| vec![0; n]).collect();
    for block in &blocks {
        for (i, list) in block.members.iter().enumerate() {
            for (slot, &v) in list.iter().enumerate() {
                slot_of[i][v] = slot;
            }
        }
    }

    Ok(AlignmentResult {
        blocks,
        cluster_of: clustering.assignment,
        slot_of,
        node_counts,
        config: config.clone(),
        barycenter_trace,
        timings: Timings {
            embeddings_secs,
            barycenter_secs,
            solve_secs,
            total_secs: total_start.elapsed().as_secs_f64(),
        },
    })
}

/// Write a result as one JSON header line followed by sparse entry lines
/// `j i_1 ... i_K score` (global node ids, entries at or above the emit
/// threshold).
pub fn write_alignment(result: &AlignmentResult, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    let mut out = std::io::BufWriter::new(file);
    let mut header = result.metadata_json();
    header["timings"] = serde_json::to_value(&result.timings).expect("timings serialize");
    writeln!(out, "{header}")?;
    for block in &result.blocks {
        let shape = block.tensor.shape().to_vec();
        let mut idx = vec![0usize; shape.len()];
        for &score in block.tensor.iter() {
            if score >= result.config.emit_threshold {
                let mut line = block.cluster.to_string();
                for (axis, &slot) in idx.iter().enumerate() {
                    line.push(' ');
                    line.push_str(&block.members[axis][slot].to_string());
                }
                writeln!(out, "{line} {score}")?;
            }
            for axis in (0..shape.len()).rev() {
                idx[axis] += 1;
                if idx[axis] < shape[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Read an alignment file back into a result.
///
/// Objective traces and per-block solver diagnostics are not stored in the
/// file; the returned blocks carry empty traces. Entries below the emit
/// threshold were dropped at write time and read back as zero.
pub fn read_alignment(path: impl AsRef<Path>) -> Result<AlignmentResult> {
    let file = std::fs::File::open(path.as_ref())?;
    let reader = std::io::BufReader::new(file);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Format {
            line: 1,
            msg: "empty alignment file".into(),
        })?
        .map_err(Error::Io)?;
    let header: serde_json::Value = serde_json::from_str(&header_line).map_err(|e| Error::Format {
        line: 1,
        msg: format!("bad header JSON: {e}"),
    })?;
    let config: PipelineConfig = serde_json::from_value(
        header
            .get("config")
            .cloned()
            .ok_or_else(|| Error::Format {
                line: 1,
                msg: "header missing config".into(),
            })?,
    )
    .map_err(|e| Error::Format {
        line: 1,
        msg: format!("bad config in header: {e}"),
    })?;
    let node_counts: Vec<usize> =
        serde_json::from_value(header.get("node_counts").cloned().unwrap_or_default()).map_err(
            |e| Error::Format {
                line: 1,
                msg: format!("bad node_counts in header: {e}"),
            },
        )?;
    let clusters: Vec<Vec<Vec<usize>>> =
        serde_json::from_value(header.get("clusters").cloned().unwrap_or_default()).map_err(
            |e| Error::Format {
                line: 1,
                msg: format!("bad clusters in header: {e}"),
            },
        )?;
    let timings: Timings =
        serde_json::from_value(header.get("timings").cloned().unwrap_or_default())
            .unwrap_or_default();

    let k = node_counts.len();
    let mut cluster_of: Vec<Vec<usize>> = node_counts.iter().map(|&n| vec![0; n]).collect();
    let mut slot_of: Vec<Vec<usize>> = node_counts.iter().map(|&n| vec![0; n]).collect();
    let mut blocks: Vec<AlignmentBlock> = Vec::with_capacity(clusters.len());
    for (j, members) in clusters.into_iter().enumerate() {
        if members.len() != k {
            return Err(Error::Format {
                line: 1,
                msg: format!("cluster {j} lists {} graphs, expected {k}", members.len()),
            });
        }
        for (i, list) in members.iter().enumerate() {
            for (slot, &v) in list.iter().enumerate() {
                if v >= node_counts[i] {
                    return Err(Error::Format {
                        line: 1,
                        msg: format!("cluster {j} references node {v} outside graph {i}"),
                    });
                }
                cluster_of[i][v] = j;
                slot_of[i][v] = slot;
            }
        }
        let shape: Vec<usize> = members.iter().map(Vec::len).collect();
        blocks.push(AlignmentBlock {
            cluster: j,
            members,
            tensor: ArrayD::zeros(shape),
            objective_trace: Vec::new(),
            marginal_error: 0.0,
            converged: true,
        });
    }

    for (offset, line) in lines.enumerate() {
        let line_no = offset + 2;
        let line = line.map_err(Error::Io)?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != k + 2 {
            return Err(Error::Format {
                line: line_no,
                msg: format!("expected {} fields, found {}", k + 2, fields.len()),
            });
        }
        let parse_idx = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Format {
                line: line_no,
                msg: format!("bad index {s:?}"),
            })
        };
        let j: usize = parse_idx(fields[0])?;
        if j >= blocks.len() {
            return Err(Error::Format {
                line: line_no,
                msg: format!("cluster {j} out of range"),
            });
        }
        let score: f64 = fields[k + 1].parse().map_err(|_| Error::Format {
            line: line_no,
            msg: format!("bad score {:?}", fields[k + 1]),
        })?;
        let mut idx = Vec::with_capacity(k);
        for (i, field) in fields[1..=k].iter().enumerate() {
            let global = parse_idx(field)?;
            if global >= node_counts[i] || cluster_of[i][global] != j {
                return Err(Error::Format {
                    line: line_no,
                    msg: format!("node {global} of graph {i} is not in cluster {j}"),
                });
            }
            idx.push(slot_of[i][global]);
        }
        blocks[j].tensor[ndarray::IxDyn(&idx)] = score;
    }

    Ok(AlignmentResult {
        blocks,
        cluster_of,
        slot_of,
        node_counts,
        config,
        barycenter_trace: Vec::new(),
        timings,
    })
}
