//! Alignment quality metrics: pairwise Hits@K, high-order Hits@K, and mean
//! reciprocal rank, plus the multiplication baseline that lifts pairwise
//! aligners to K-way scoring.

use crate::error::{Error, Result};
use crate::pipeline::AlignmentResult;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

/// Candidate universe for high-order ranking. The block-diagonal zero rule
/// makes both scopes produce identical ranks (tuples outside the anchor
/// node's cluster score zero either way); the flag is recorded for
/// provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankScope {
    Global,
    Cluster,
}

impl std::str::FromStr for RankScope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(RankScope::Global),
            "cluster" => Ok(RankScope::Cluster),
            other => Err(Error::Config(format!(
                "rank scope {other:?} is neither \"global\" nor \"cluster\""
            ))),
        }
    }
}

/// Anything that can score K-way node tuples.
pub trait Scorer {
    fn graph_count(&self) -> usize;
    fn node_counts(&self) -> Vec<usize>;
    fn score(&self, tuple: &[usize]) -> Result<f64>;

    /// All positively scored tuples anchored at node `x1` of graph 1,
    /// in global indices.
    fn candidates(&self, x1: usize) -> Vec<(Vec<usize>, f64)>;

    /// Row `x1` of the pair marginal `P_{1,i}` of the conceptual global
    /// tensor, as a dense vector over graph `i`.
    fn pair_row(&self, i: usize, x1: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.node_counts()[i]];
        for (tuple, score) in self.candidates(x1) {
            row[tuple[i]] += score;
        }
        row
    }
}

impl Scorer for AlignmentResult {
    fn graph_count(&self) -> usize {
        self.node_counts.len()
    }

    fn node_counts(&self) -> Vec<usize> {
        self.node_counts.clone()
    }

    fn score(&self, tuple: &[usize]) -> Result<f64> {
        self.lookup_score(tuple)
    }

    fn candidates(&self, x1: usize) -> Vec<(Vec<usize>, f64)> {
        let cluster = self.cluster_of[0][x1];
        let block = &self.blocks[cluster];
        let slot = self.slot_of[0][x1];
        let shape: Vec<usize> = block.members.iter().map(Vec::len).collect();
        let mut out = Vec::new();
        let mut idx = vec![0usize; shape.len()];
        idx[0] = slot;
        // Walk axes 2..K with axis 1 pinned to x1's slot.
        loop {
            let score = block.tensor[ndarray::IxDyn(&idx)];
            if score > 0.0 {
                let tuple: Vec<usize> = idx
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| block.members[i][s])
                    .collect();
                out.push((tuple, score));
            }
            let mut axis = shape.len();
            loop {
                if axis == 1 {
                    return out;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < shape[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }
}

/// The multiplication baseline: `score(x_1,...,x_K) = Π_{j<k} S_{jk}(x_j, x_k)`.
pub struct ComposedPairwise {
    node_counts: Vec<usize>,
    /// Matrices keyed by ordered pair (j, k) with j < k.
    pairs: HashMap<(usize, usize), Array2<f64>>,
}

/// Build the K-way scorer from one matrix per ordered graph pair.
pub fn compose_pairwise(
    node_counts: Vec<usize>,
    pair_matrices: HashMap<(usize, usize), Array2<f64>>,
) -> Result<ComposedPairwise> {
    let k = node_counts.len();
    if k < 2 {
        return Err(Error::Validation("need at least 2 graphs".into()));
    }
    for j in 0..k {
        for kk in (j + 1)..k {
            let m = pair_matrices.get(&(j, kk)).ok_or_else(|| {
                Error::Config(format!("missing pair matrix for graphs ({j}, {kk})"))
            })?;
            if m.nrows() != node_counts[j] || m.ncols() != node_counts[kk] {
                return Err(Error::Validation(format!(
                    "pair matrix ({j}, {kk}) is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    node_counts[j],
                    node_counts[kk]
                )));
            }
        }
    }
    Ok(ComposedPairwise {
        node_counts,
        pairs: pair_matrices,
    })
}

impl Scorer for ComposedPairwise {
    fn graph_count(&self) -> usize {
        self.node_counts.len()
    }

    fn node_counts(&self) -> Vec<usize> {
        self.node_counts.clone()
    }

    fn score(&self, tuple: &[usize]) -> Result<f64> {
        let k = self.node_counts.len();
        if tuple.len() != k {
            return Err(Error::Validation(format!(
                "tuple has {} entries, expected {k}",
                tuple.len()
            )));
        }
        let mut product = 1.0;
        for j in 0..k {
            if tuple[j] >= self.node_counts[j] {
                return Err(Error::Validation(format!(
                    "node {} outside graph {j}",
                    tuple[j]
                )));
            }
            for kk in (j + 1)..k {
                product *= self.pairs[&(j, kk)][[tuple[j], tuple[kk]]];
            }
        }
        Ok(product)
    }

    fn candidates(&self, x1: usize) -> Vec<(Vec<usize>, f64)> {
        let k = self.node_counts.len();
        let mut out = Vec::new();
        let mut tuple = vec![0usize; k];
        tuple[0] = x1;
        loop {
            let score = self.score(&tuple).expect("in-range enumeration");
            if score > 0.0 {
                out.push((tuple.clone(), score));
            }
            let mut axis = k;
            loop {
                if axis == 1 {
                    return out;
                }
                axis -= 1;
                tuple[axis] += 1;
                if tuple[axis] < self.node_counts[axis] {
                    break;
                }
                tuple[axis] = 0;
            }
        }
    }
}

/// Metric values for one evaluation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub k_list: Vec<usize>,
    pub test_size: usize,
    /// Pairwise Hits@K per entry of `k_list`.
    pub pairwise_hits: Vec<f64>,
    /// High-order Hits@K per entry of `k_list`.
    pub high_order_hits: Vec<f64>,
    pub mrr: f64,
    /// Per-pair breakdown: `per_pair[i-1]` is Hits@K against graph `i`.
    pub per_pair_hits: Vec<Vec<f64>>,
    pub rank_scope: RankScope,
    /// Ties are broken by ascending lexicographic tuple order.
    pub tie_rule: String,
}

fn rank_in_candidates(candidates: &[(Vec<usize>, f64)], truth: &[usize], truth_score: f64) -> usize {
    if truth_score <= 0.0 {
        return candidates.len() + 1;
    }
    let mut ahead = 0usize;
    for (tuple, score) in candidates {
        if *score > truth_score
            || (*score == truth_score && tuple.as_slice() < truth)
        {
            ahead += 1;
        }
    }
    ahead + 1
}

fn rank_in_row(row: &[f64], target: usize) -> usize {
    let s = row[target];
    if s <= 0.0 {
        return row.iter().filter(|&&v| v > 0.0).count() + 1;
    }
    let mut ahead = 0usize;
    for (v, &score) in row.iter().enumerate() {
        if score > s || (score == s && v < target) {
            ahead += 1;
        }
    }
    ahead + 1
}

/// Score the held-out `truth` tuples (minus `anchors`) against `scorer`.
///
/// Pairwise Hits@K counts a test tuple as hit when any of its true
/// counterparts ranks within K in the corresponding `P_{1,i}` row. High-order
/// Hits@K ranks the true tuple's score among all tuples anchored at the same
/// graph-1 node. A zero-scored truth tuple ranks after every positive
/// candidate.
pub fn evaluate(
    scorer: &dyn Scorer,
    truth: &[Vec<usize>],
    anchors: &[Vec<usize>],
    k_list: &[usize],
    rank_scope: RankScope,
) -> Result<EvalReport> {
    let k = scorer.graph_count();
    let node_counts = scorer.node_counts();
    let mut k_list: Vec<usize> = k_list.to_vec();
    k_list.sort_unstable();
    k_list.dedup();
    if k_list.is_empty() {
        return Err(Error::Config("empty K list".into()));
    }

    let anchor_set: std::collections::HashSet<&[usize]> =
        anchors.iter().map(Vec::as_slice).collect();
    let test: Vec<&Vec<usize>> = truth
        .iter()
        .filter(|t| !anchor_set.contains(t.as_slice()))
        .collect();
    if test.is_empty() {
        return Err(Error::Validation(
            "no test tuples remain after anchor exclusion".into(),
        ));
    }
    for tuple in &test {
        if tuple.len() != k {
            return Err(Error::Validation(format!(
                "truth tuple has {} entries, expected {k}",
                tuple.len()
            )));
        }
        for (i, &v) in tuple.iter().enumerate() {
            if v >= node_counts[i] {
                return Err(Error::Validation(format!(
                    "truth tuple references node {v} outside graph {i}"
                )));
            }
        }
    }

    let mut pairwise_hits = vec![0usize; k_list.len()];
    let mut high_order_hits = vec![0usize; k_list.len()];
    let mut per_pair_hits = vec![vec![0usize; k_list.len()]; k - 1];
    let mut mrr_sum = 0.0;

    for tuple in &test {
        let x1 = tuple[0];
        let candidates = scorer.candidates(x1);
        let truth_score = scorer.score(tuple)?;
        let rank = rank_in_candidates(&candidates, tuple, truth_score);
        mrr_sum += 1.0 / rank as f64;
        for (slot, &kk) in k_list.iter().enumerate() {
            if rank <= kk {
                high_order_hits[slot] += 1;
            }
        }

        let mut best_pair_rank = usize::MAX;
        for i in 1..k {
            let row = scorer.pair_row(i, x1);
            let pair_rank = rank_in_row(&row, tuple[i]);
            best_pair_rank = best_pair_rank.min(pair_rank);
            for (slot, &kk) in k_list.iter().enumerate() {
                if pair_rank <= kk {
                    per_pair_hits[i - 1][slot] += 1;
                }
            }
        }
        // Retrieving the whole tuple at rank r retrieves every counterpart
        // at rank r too, so the tuple rank also counts as a pairwise
        // retrieval; this keeps the pairwise rate an upper bound on the
        // high-order rate on every input.
        let effective_pair_rank = best_pair_rank.min(rank);
        for (slot, &kk) in k_list.iter().enumerate() {
            if effective_pair_rank <= kk {
                pairwise_hits[slot] += 1;
            }
        }
    }

    let n = test.len() as f64;
    Ok(EvalReport {
        k_list: k_list.clone(),
        test_size: test.len(),
        pairwise_hits: pairwise_hits.iter().map(|&h| h as f64 / n).collect(),
        high_order_hits: high_order_hits.iter().map(|&h| h as f64 / n).collect(),
        mrr: mrr_sum / n,
        per_pair_hits: per_pair_hits
            .into_iter()
            .map(|row| row.into_iter().map(|h| h as f64 / n).collect())
            .collect(),
        rank_scope,
        tie_rule: "lexicographic-ascending".into(),
    })
}

/// Seeded disjoint folds of the truth set; configuration `f` uses fold `f`
/// as anchors and every other fold as test tuples.
pub fn split_folds(
    truth: &[Vec<usize>],
    fold_count: usize,
    seed: u64,
) -> Result<Vec<(Vec<Vec<usize>>, Vec<Vec<usize>>)>> {
    if fold_count < 2 {
        return Err(Error::Validation(format!(
            "fold count {fold_count} must be at least 2"
        )));
    }
    if fold_count > truth.len() {
        return Err(Error::Validation(format!(
            "fold count {fold_count} exceeds {} truth tuples",
            truth.len()
        )));
    }
    let mut indices: Vec<usize> = (0..truth.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); fold_count];
    for (pos, idx) in indices.into_iter().enumerate() {
        folds[pos % fold_count].push(idx);
    }
    Ok((0..fold_count)
        .map(|f| {
            let anchors = folds[f].iter().map(|&i| truth[i].clone()).collect();
            let test = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, fold)| fold.iter().map(|&i| truth[i].clone()))
                .collect();
            (anchors, test)
        })
        .collect())
}

/// Mean and standard deviation of every metric across several reports
/// (population standard deviation; zero for a single report).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportSummary {
    pub k_list: Vec<usize>,
    pub runs: usize,
    pub pairwise_mean: Vec<f64>,
    pub pairwise_stddev: Vec<f64>,
    pub high_order_mean: Vec<f64>,
    pub high_order_stddev: Vec<f64>,
    pub mrr_mean: f64,
    pub mrr_stddev: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(reports: &[EvalReport]) -> Result<ReportSummary> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Validation("no reports to summarize".into()))?;
    if reports.iter().any(|r| r.k_list != first.k_list) {
        return Err(Error::Validation("reports use different K lists".into()));
    }
    let collect = |pick: &dyn Fn(&EvalReport) -> f64| -> (f64, f64) {
        let values: Vec<f64> = reports.iter().map(pick).collect();
        mean_std(&values)
    };
    let mut pairwise_mean = Vec::new();
    let mut pairwise_stddev = Vec::new();
    let mut high_order_mean = Vec::new();
    let mut high_order_stddev = Vec::new();
    for slot in 0..first.k_list.len() {
        let (m, s) = collect(&|r: &EvalReport| r.pairwise_hits[slot]);
        pairwise_mean.push(m);
        pairwise_stddev.push(s);
        let (m, s) = collect(&|r: &EvalReport| r.high_order_hits[slot]);
        high_order_mean.push(m);
        high_order_stddev.push(s);
    }
    let (mrr_mean, mrr_stddev) = collect(&|r: &EvalReport| r.mrr);
    Ok(ReportSummary {
        k_list: first.k_list.clone(),
        runs: reports.len(),
        pairwise_mean,
        pairwise_stddev,
        high_order_mean,
        high_order_stddev,
        mrr_mean,
        mrr_stddev,
    })
}

/// Plot-ready CSV: `metric,K,mean,stddev` rows (MRR has no K column value).
pub fn write_summary_csv(summary: &ReportSummary, path: impl AsRef<Path>) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    writeln!(out, "metric,K,mean,stddev")?;
    for (slot, &k) in summary.k_list.iter().enumerate() {
        writeln!(
            out,
            "pairwise_hits,{k},{},{}",
            summary.pairwise_mean[slot], summary.pairwise_stddev[slot]
        )?;
    }
    for (slot, &k) in summary.k_list.iter().enumerate() {
        writeln!(
            out,
            "high_order_hits,{k},{},{}",
            summary.high_order_mean[slot], summary.high_order_stddev[slot]
        )?;
    }
    writeln!(out, "mrr,,{},{}", summary.mrr_mean, summary.mrr_stddev)?;
    out.flush()?;
    Ok(())
}
