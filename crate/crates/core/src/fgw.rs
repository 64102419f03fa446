//! Pairwise fused Gromov-Wasserstein machinery and the block-coordinate
//! barycenter loop producing cluster-level alignments.

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::sinkhorn::SolverConfig;
use ndarray::{Array1, Array2, ArrayD};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Linearized GW term for a pair of structure matrices:
/// `L(v, u) = C1^2(v,·) p + C2^2(u,·) q - 2 C1(v,·) S C2(u,·)^T`
/// with `p`, `q` the row/column marginals of `S`.
pub fn pairwise_gw_l(c1: &Array2<f64>, c2: &Array2<f64>, s: &Array2<f64>) -> Array2<f64> {
    let p: Array1<f64> = s.sum_axis(ndarray::Axis(1));
    let q: Array1<f64> = s.sum_axis(ndarray::Axis(0));
    let a1 = c1.mapv(|x| x * x).dot(&p);
    let a2 = c2.mapv(|x| x * x).dot(&q);
    let cross = c1.dot(s).dot(&c2.t());
    let mut l = Array2::zeros((c1.nrows(), c2.nrows()));
    for i in 0..l.nrows() {
        for j in 0..l.ncols() {
            l[[i, j]] = a1[i] + a2[j] - 2.0 * cross[[i, j]];
        }
    }
    l
}

/// A solved two-graph FGW instance.
#[derive(Debug, Clone)]
pub struct FgwSolution {
    pub coupling: Array2<f64>,
    /// Objective value at the returned (locally optimal) coupling.
    pub value: f64,
    pub objective_trace: Vec<f64>,
    pub marginal_error: f64,
}

/// Solve a two-graph FGW problem as the K=2 case of the proximal solver.
///
/// The cross cost enters the objective linearly; the structure term is squared.
pub fn fgw_solve_pair(
    cross_cost: &Array2<f64>,
    a1: &Array2<f64>,
    a2: &Array2<f64>,
    mu1: &Measure,
    mu2: &Measure,
    config: &SolverConfig,
) -> Result<FgwSolution> {
    let base: ArrayD<f64> = cross_cost.clone().into_dyn();
    let intra = [a1.clone(), a2.clone()];
    let marginals = [mu1.clone(), mu2.clone()];
    let out = crate::proximal::proximal_solve(&base, &intra, &marginals, config)?;
    let coupling = out
        .coupling
        .tensor
        .into_dimensionality::<ndarray::Ix2>()
        .expect("K=2 coupling");
    Ok(FgwSolution {
        coupling,
        value: *out.objective_trace.last().unwrap(),
        objective_trace: out.objective_trace,
        marginal_error: out.coupling.marginal_error,
    })
}

/// Consensus-graph state produced by the barycenter iteration.
#[derive(Debug, Clone)]
pub struct BarycenterState {
    /// `M x M` nonnegative structure matrix of the consensus graph.
    pub structure: Array2<f64>,
    /// `M x d'` consensus feature matrix.
    pub features: Array2<f64>,
    pub measure: Measure,
    /// Per-graph couplings `S_i` of shape `n_i x M`.
    pub couplings: Vec<Array2<f64>>,
    /// Sum of per-graph FGW objectives after each round.
    pub objective_trace: Vec<f64>,
}

/// Aggregated structure update: `(Σ_i S_i^T A_i S_i) / (mu_b mu_b^T)`
/// entrywise. Callers averaging over `K` graphs divide by `K` themselves.
pub fn update_barycenter_structure(
    adjacencies: &[Array2<f64>],
    couplings: &[Array2<f64>],
    mu_b: &Measure,
) -> Result<Array2<f64>> {
    if mu_b.weights().iter().any(|&w| w <= 0.0) {
        return Err(Error::Numerical(
            "barycenter measure has a zero entry; structure update undefined".into(),
        ));
    }
    let m = mu_b.len();
    let mut acc = Array2::zeros((m, m));
    for (a, s) in adjacencies.iter().zip(couplings) {
        acc = acc + s.t().dot(a).dot(s);
    }
    for i in 0..m {
        for j in 0..m {
            acc[[i, j]] /= mu_b.weights()[i] * mu_b.weights()[j];
        }
    }
    Ok(acc)
}

/// Aggregated feature update: `Σ_i diag(1 / mu_b) S_i^T X_i`.
pub fn update_barycenter_features(
    feature_matrices: &[Array2<f64>],
    couplings: &[Array2<f64>],
    mu_b: &Measure,
) -> Result<Array2<f64>> {
    if mu_b.weights().iter().any(|&w| w <= 0.0) {
        return Err(Error::Numerical(
            "barycenter measure has a zero entry; feature update undefined".into(),
        ));
    }
    let m = mu_b.len();
    let d = feature_matrices
        .first()
        .map(|x| x.ncols())
        .ok_or_else(|| Error::Validation("no feature matrices".into()))?;
    if feature_matrices.iter().any(|x| x.ncols() != d) {
        return Err(Error::Validation("inconsistent feature widths".into()));
    }
    let mut acc = Array2::zeros((m, d));
    for (x, s) in feature_matrices.iter().zip(couplings) {
        acc = acc + s.t().dot(x);
    }
    for i in 0..m {
        for j in 0..d {
            acc[[i, j]] /= mu_b.weights()[i];
        }
    }
    Ok(acc)
}

fn squared_cross_cost(features: &Array2<f64>, barycenter: &Array2<f64>) -> Array2<f64> {
    let mut c = Array2::zeros((features.nrows(), barycenter.nrows()));
    for v in 0..features.nrows() {
        for u in 0..barycenter.nrows() {
            let d2: f64 = features
                .row(v)
                .iter()
                .zip(barycenter.row(u).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            c[[v, u]] = d2;
        }
    }
    c
}

fn fgw_value_at(
    cross: &Array2<f64>,
    a: &Array2<f64>,
    a_b: &Array2<f64>,
    s: &Array2<f64>,
    alpha: f64,
) -> f64 {
    let linear: f64 = cross.iter().zip(s.iter()).map(|(c, v)| c * v).sum();
    let l = pairwise_gw_l(a, a_b, s);
    let quad: f64 = l.iter().zip(s.iter()).map(|(c, v)| c * v).sum();
    (1.0 - alpha) * linear + alpha * quad
}

const BCD_MONOTONE_SLACK: f64 = 1e-6;

/// Block-coordinate descent for the consensus graph of `K` inputs.
///
/// Each round takes one proximal transport step per graph against the current
/// barycenter, then refits the barycenter structure and features as the
/// `1/K`-weighted first-order optima.
pub fn barycenter_bcd(
    feature_matrices: &[Array2<f64>],
    adjacencies: &[Array2<f64>],
    measures: &[Measure],
    cluster_count: usize,
    config: &SolverConfig,
    seed: u64,
) -> Result<BarycenterState> {
    config.validate()?;
    let k = feature_matrices.len();
    if k == 0 || adjacencies.len() != k || measures.len() != k {
        return Err(Error::Validation("inconsistent barycenter inputs".into()));
    }
    let min_n = measures.iter().map(Measure::len).min().unwrap();
    if cluster_count == 0 || cluster_count > min_n {
        return Err(Error::Validation(format!(
            "cluster count {cluster_count} not in [1, {min_n}]"
        )));
    }
    let d = feature_matrices[0].ncols();
    if feature_matrices.iter().any(|x| x.ncols() != d) {
        return Err(Error::Validation("inconsistent feature widths".into()));
    }

    let m = cluster_count;
    let mu_b = Measure::uniform(m)?;
    let kf = k as f64;

    // Seed the barycenter features with M distinct rows of graph 1 and the
    // structure at the mean edge density of the inputs.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<usize> = (0..feature_matrices[0].nrows()).collect();
    rows.shuffle(&mut rng);
    rows.truncate(m);
    let mut features_b = Array2::zeros((m, d));
    for (slot, &row) in rows.iter().enumerate() {
        features_b.row_mut(slot).assign(&feature_matrices[0].row(row));
    }
    let density = adjacencies
        .iter()
        .map(|a| a.sum() / (a.nrows() * a.ncols()) as f64)
        .sum::<f64>()
        / kf;
    let mut structure_b = Array2::from_elem((m, m), density);

    let mut couplings: Vec<Array2<f64>> = measures
        .iter()
        .map(|mu| {
            let mut s = Array2::zeros((mu.len(), m));
            for i in 0..mu.len() {
                for j in 0..m {
                    s[[i, j]] = mu.weights()[i] * mu_b.weights()[j];
                }
            }
            s
        })
        .collect();

    let mut trace: Vec<f64> = Vec::with_capacity(config.outer_iters);
    for round in 0..config.outer_iters {
        for i in 0..k {
            let cross = squared_cross_cost(&feature_matrices[i], &features_b).into_dyn();
            let intra = [adjacencies[i].clone(), structure_b.clone()];
            let (next, _) = crate::proximal::proximal_step(
                &cross,
                &intra,
                &[measures[i].clone(), mu_b.clone()],
                &couplings[i].clone().into_dyn(),
                config,
            )
            .map_err(|e| Error::Numerical(format!("barycenter round {round}, graph {i}: {e}")))?;
            couplings[i] = next
                .into_dimensionality::<ndarray::Ix2>()
                .expect("K=2 coupling");
        }

        structure_b = update_barycenter_structure(adjacencies, &couplings, &mu_b)?.mapv(|v| v / kf);
        features_b = update_barycenter_features(feature_matrices, &couplings, &mu_b)?
            .mapv(|v| v / kf);

        let objective: f64 = (0..k)
            .map(|i| {
                let cross = squared_cross_cost(&feature_matrices[i], &features_b);
                fgw_value_at(
                    &cross,
                    &adjacencies[i],
                    &structure_b,
                    &couplings[i],
                    config.alpha,
                )
            })
            .sum();
        if let Some(&previous) = trace.last() {
            if objective > previous + BCD_MONOTONE_SLACK {
                return Err(Error::Numerical(format!(
                    "barycenter objective increased from {previous} to {objective} at \
                     round {round}; trace: {trace:?}"
                )));
            }
            let improvement = previous - objective;
            trace.push(objective);
            if improvement < config.outer_tol {
                break;
            }
        } else {
            trace.push(objective);
        }
    }

    Ok(BarycenterState {
        structure: structure_b,
        features: features_b,
        measure: mu_b,
        couplings,
        objective_trace: trace,
    })
}

/// Per-graph partition of nodes into jointly aligned clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAlignment {
    /// `assignment[i][v]` is the cluster id of node `v` in graph `i`.
    pub assignment: Vec<Vec<usize>>,
    /// `members[j][i]` lists the nodes of graph `i` in cluster `j`, ascending.
    pub members: Vec<Vec<Vec<usize>>>,
}

impl ClusterAlignment {
    pub fn cluster_count(&self) -> usize {
        self.members.len()
    }
}

fn argmax_row(row: ndarray::ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (j, &v) in row.iter().enumerate() {
        if v > best_val {
            best_val = v;
            best = j;
        }
    }
    best
}

/// Assign every node to its argmax barycenter column (ties to the lowest
/// cluster index), then repair clusters that miss some graph entirely:
/// their nodes move to the best-scoring cluster among the valid ones.
pub fn assign_clusters(state: &BarycenterState) -> ClusterAlignment {
    let k = state.couplings.len();
    let m = state.measure.len();
    let mut assignment: Vec<Vec<usize>> = state
        .couplings
        .iter()
        .map(|s| (0..s.nrows()).map(|v| argmax_row(s.row(v))).collect())
        .collect();

    // A cluster is valid once every graph contributes at least one node.
    let mut counts = vec![vec![0usize; m]; k];
    for (i, assigned) in assignment.iter().enumerate() {
        for &c in assigned {
            counts[i][c] += 1;
        }
    }
    let valid: Vec<bool> = (0..m)
        .map(|j| (0..k).all(|i| counts[i][j] > 0))
        .collect();

    if valid.iter().any(|&v| v) {
        for (i, assigned) in assignment.iter_mut().enumerate() {
            for (v, cluster) in assigned.iter_mut().enumerate() {
                if !valid[*cluster] {
                    let row = state.couplings[i].row(v);
                    let mut best = None;
                    let mut best_val = f64::NEG_INFINITY;
                    for (j, &score) in row.iter().enumerate() {
                        if valid[j] && score > best_val {
                            best_val = score;
                            best = Some(j);
                        }
                    }
                    *cluster = best.expect("at least one valid cluster");
                }
            }
        }
    } else {
        // No cluster covers all graphs; collapse to a single cluster.
        for assigned in &mut assignment {
            for cluster in assigned.iter_mut() {
                *cluster = 0;
            }
        }
    }

    // Relabel surviving clusters compactly in ascending original order.
    let mut used: Vec<usize> = assignment
        .iter()
        .flat_map(|a| a.iter().copied())
        .collect();
    used.sort_unstable();
    used.dedup();
    let relabel: std::collections::HashMap<usize, usize> =
        used.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    for assigned in &mut assignment {
        for cluster in assigned.iter_mut() {
            *cluster = relabel[cluster];
        }
    }

    let m_final = used.len();
    let mut members = vec![vec![Vec::new(); k]; m_final];
    for (i, assigned) in assignment.iter().enumerate() {
        for (v, &c) in assigned.iter().enumerate() {
            members[c][i].push(v);
        }
    }
    ClusterAlignment {
        assignment,
        members,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mfgw::oracle;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    fn uniform(n: usize) -> Measure {
        Measure::uniform(n).unwrap()
    }

    fn path_adj(n: usize) -> Array2<f64> {
        let mut a = Array2::zeros((n, n));
        for i in 0..n - 1 {
            a[[i, i + 1]] = 1.0;
            a[[i + 1, i]] = 1.0;
        }
        a
    }

    #[test]
    fn gw_l_scalar_case() {
        let c1 = array![[2.0]];
        let c2 = array![[5.0]];
        let s = array![[1.0]];
        let l = pairwise_gw_l(&c1, &c2, &s);
        assert!((l[[0, 0]] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn gw_l_vanishes_on_matching_permutation() {
        let c1 = path_adj(3);
        // Relabel nodes by [2, 0, 1] and couple along that permutation.
        let perm = [2usize, 0, 1];
        let mut c2 = Array2::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                c2[[i, j]] = c1[[perm[i], perm[j]]];
            }
        }
        let mut s = Array2::zeros((3, 3));
        for (i, &p) in perm.iter().enumerate() {
            s[[p, i]] = 1.0 / 3.0;
        }
        let l = pairwise_gw_l(&c1, &c2, &s);
        let inner: f64 = l.iter().zip(s.iter()).map(|(a, b)| a * b).sum();
        assert!(inner.abs() < 1e-9);
    }

    #[test]
    fn gw_l_inner_product_matches_quadruple_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let c1 = crate::mfgw::tests_support::random_symmetric(4, &mut rng);
            let c2 = crate::mfgw::tests_support::random_symmetric(4, &mut rng);
            let mut s = Array2::from_shape_fn((4, 4), |_| rng.gen::<f64>());
            let sum = s.sum();
            s.mapv_inplace(|v| v / sum);
            let l = pairwise_gw_l(&c1, &c2, &s);
            let inner: f64 = l.iter().zip(s.iter()).map(|(a, b)| a * b).sum();
            let brute =
                oracle::gw_double_sum(&[c1.clone(), c2.clone()], &s.clone().into_dyn());
            assert!((inner - brute).abs() < 1e-9, "{inner} vs {brute}");
        }
    }

    #[test]
    fn fgw_pair_identical_graphs_zero_value() {
        let a = path_adj(3);
        let cross = Array2::zeros((3, 3));
        let config = SolverConfig {
            alpha: 1.0,
            outer_iters: 100,
            ..SolverConfig::default()
        };
        let sol =
            fgw_solve_pair(&cross, &a, &a, &uniform(3), &uniform(3), &config).unwrap();
        assert!(sol.value < 1e-6, "value {}", sol.value);
    }

    #[test]
    fn fgw_pair_alpha_zero_assignment() {
        let cross = array![[0.0, 1.0], [1.0, 0.0]];
        let zero = Array2::zeros((2, 2));
        let config = SolverConfig {
            alpha: 0.0,
            ..SolverConfig::default()
        };
        let sol = fgw_solve_pair(&cross, &zero, &zero, &uniform(2), &uniform(2), &config)
            .unwrap();
        assert!(sol.value < 1e-6);
        assert!((sol.coupling[[0, 0]] - 0.5).abs() < 1e-4);
        assert!((sol.coupling[[1, 1]] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn fgw_pair_path_vs_triangle_positive() {
        let path = path_adj(3);
        let mut tri = path_adj(3);
        tri[[0, 2]] = 1.0;
        tri[[2, 0]] = 1.0;
        let cross = Array2::zeros((3, 3));
        let config = SolverConfig {
            alpha: 1.0,
            outer_iters: 100,
            ..SolverConfig::default()
        };
        let sol =
            fgw_solve_pair(&cross, &path, &tri, &uniform(3), &uniform(3), &config).unwrap();
        // No permutation coupling achieves zero either.
        let best_perm =
            crate::mfgw::exhaustive_pairwise_fgw(&cross, &path, &tri, 1.0).unwrap();
        assert!(best_perm > 0.0);
        assert!(sol.value > 0.0);
    }

    #[test]
    fn structure_update_identity_case() {
        // K=1, S = I/n, uniform measures: the update reproduces A_1.
        let a = path_adj(4);
        let s = Array2::from_diag(&Array1::from_elem(4, 0.25));
        let out = update_barycenter_structure(&[a.clone()], &[s], &uniform(4)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((out[[i, j]] - a[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn structure_update_zero_inputs() {
        let z = Array2::zeros((3, 3));
        let s = Array2::from_elem((3, 3), 1.0 / 9.0);
        let out = update_barycenter_structure(&[z], &[s], &uniform(3)).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn structure_update_preserves_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = crate::mfgw::tests_support::random_symmetric(4, &mut rng);
        let s = Array2::from_shape_fn((4, 3), |_| rng.gen::<f64>() / 12.0);
        let out = update_barycenter_structure(&[a], &[s], &uniform(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((out[[i, j]] - out[[j, i]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn feature_update_permutation_case() {
        // K=1, permutation coupling, M=n: X_b is the permuted feature matrix.
        let x = array![[1.0, 0.0], [2.0, 1.0], [3.0, 2.0]];
        let perm = [1usize, 2, 0];
        let mut s = Array2::zeros((3, 3));
        for (v, &b) in perm.iter().enumerate() {
            s[[v, b]] = 1.0 / 3.0;
        }
        let out = update_barycenter_features(&[x.clone()], &[s], &uniform(3)).unwrap();
        for v in 0..3 {
            for c in 0..2 {
                assert!((out[[perm[v], c]] - x[[v, c]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn feature_update_is_linear_in_graph_sum() {
        let x = array![[1.0], [2.0]];
        let s = Array2::from_elem((2, 2), 0.25);
        let one = update_barycenter_features(&[x.clone()], &[s.clone()], &uniform(2)).unwrap();
        let two = update_barycenter_features(
            &[x.clone(), x],
            &[s.clone(), s],
            &uniform(2),
        )
        .unwrap();
        for i in 0..2 {
            assert!((two[[i, 0]] - 2.0 * one[[i, 0]]).abs() < 1e-12);
        }
    }

    #[test]
    fn bcd_identical_graphs_full_resolution_reaches_zero() {
        // M = n with identical inputs admits a zero-cost barycenter.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 6;
        let a = {
            let mut a = path_adj(n);
            a[[0, 3]] = 1.0;
            a[[3, 0]] = 1.0;
            a
        };
        let x = Array2::from_shape_fn((n, 3), |_| rng.gen::<f64>());
        let config = SolverConfig {
            outer_iters: 60,
            ..SolverConfig::default()
        };
        let state = barycenter_bcd(
            &[x.clone(), x.clone(), x],
            &[a.clone(), a.clone(), a],
            &[uniform(n), uniform(n), uniform(n)],
            n,
            &config,
            0,
        )
        .unwrap();
        let last = *state.objective_trace.last().unwrap();
        assert!(last <= 1e-6, "objective {last}, trace {:?}", state.objective_trace);
    }

    #[test]
    fn bcd_single_cluster_forces_couplings() {
        let a = path_adj(4);
        let x = Array2::from_elem((4, 2), 0.5);
        let state = barycenter_bcd(
            &[x.clone(), x],
            &[a.clone(), a],
            &[uniform(4), uniform(4)],
            1,
            &SolverConfig::default(),
            0,
        )
        .unwrap();
        for s in &state.couplings {
            assert_eq!(s.ncols(), 1);
            for v in 0..4 {
                assert!((s[[v, 0]] - 0.25).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bcd_trace_is_monotone_and_couplings_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let problem = crate::graph::generate_noisy_er(12, 0.3, 2, 0.10, 0.10, 3).unwrap();
        let adj: Vec<Array2<f64>> = problem.graphs.iter().map(|g| g.adjacency()).collect();
        let x: Vec<Array2<f64>> = (0..2)
            .map(|_| Array2::from_shape_fn((12, 3), |_| rng.gen::<f64>()))
            .collect();
        let state = barycenter_bcd(
            &x,
            &adj,
            &[uniform(12), uniform(12)],
            3,
            &SolverConfig::default(),
            1,
        )
        .unwrap();
        for w in state.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{:?}", state.objective_trace);
        }
        for s in &state.couplings {
            let rows = s.sum_axis(ndarray::Axis(1));
            let cols = s.sum_axis(ndarray::Axis(0));
            let row_err: f64 = rows.iter().map(|v| (v - 1.0 / 12.0).abs()).sum();
            let col_err: f64 = cols.iter().map(|v| (v - 1.0 / 3.0).abs()).sum();
            assert!(row_err < 1e-6 && col_err < 1e-6, "row {row_err} col {col_err}");
        }
    }

    fn singleton_state(couplings: Vec<Array2<f64>>, m: usize) -> BarycenterState {
        BarycenterState {
            structure: Array2::zeros((m, m)),
            features: Array2::zeros((m, 1)),
            measure: uniform(m),
            couplings,
            objective_trace: vec![0.0],
        }
    }

    #[test]
    fn assign_argmax_and_tie_rule() {
        let s = array![[0.1, 0.7, 0.2], [0.5, 0.5, 0.0], [0.2, 0.2, 0.6]];
        let s2 = array![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        let out = assign_clusters(&singleton_state(vec![s, s2], 3));
        assert_eq!(out.assignment[0], vec![1, 0, 2]); // row 1 ties -> cluster 0
    }

    #[test]
    fn assign_scaling_invariance() {
        let s = array![[0.1, 0.7, 0.2], [0.5, 0.1, 0.4], [0.2, 0.2, 0.6]];
        let mut scaled = s.clone();
        for v in 0..3 {
            let f = (v + 2) as f64;
            for j in 0..3 {
                scaled[[v, j]] *= f;
            }
        }
        let a = assign_clusters(&singleton_state(vec![s.clone(), s], 3));
        let b = assign_clusters(&singleton_state(vec![scaled.clone(), scaled], 3));
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn assign_repairs_cluster_missing_a_graph() {
        // Cluster 1 gets nodes only from graph 0; its nodes must move to a
        // cluster covering both graphs.
        let s0 = array![[0.9, 0.05, 0.05], [0.1, 0.8, 0.1], [0.8, 0.1, 0.1]];
        let s1 = array![[0.9, 0.05, 0.05], [0.7, 0.1, 0.2], [0.1, 0.05, 0.85]];
        let out = assign_clusters(&singleton_state(vec![s0, s1], 3));
        for j in 0..out.cluster_count() {
            for i in 0..2 {
                assert!(
                    !out.members[j][i].is_empty(),
                    "cluster {j} misses graph {i}: {:?}",
                    out.members
                );
            }
        }
        // Every node appears exactly once.
        for i in 0..2 {
            let total: usize = (0..out.cluster_count())
                .map(|j| out.members[j][i].len())
                .sum();
            assert_eq!(total, 3);
        }
    }
}
