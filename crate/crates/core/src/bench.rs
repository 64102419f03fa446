//! Miniature scalability sweeps comparing hierarchical (auto clusters)
//! against flat (single cluster) alignment across graph sizes and counts.

use crate::error::Result;
use crate::graph::generate_noisy_er;
use crate::pipeline::{hot_align, PipelineConfig};
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    Hierarchical,
    Flat,
}

impl std::fmt::Display for BenchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BenchMode::Hierarchical => "hierarchical",
            BenchMode::Flat => "flat",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub mode: BenchMode,
    /// Wall time of the alignment; zero for capacity rows (never run).
    pub wall_secs: f64,
    /// Dense coupling elements the run allocated, or would need.
    pub allocated_elements: u128,
    /// "ok" or "capacity" (the run would exceed the element budget).
    pub status: String,
}

/// Dense element count of the flat (single-cluster) coupling: n^k.
fn flat_elements(n: usize, k: usize) -> u128 {
    (n as u128).pow(k as u32)
}

/// ER edge probability giving mean degree about 7.5, capped for tiny graphs.
pub fn bench_edge_probability(n: usize) -> f64 {
    (7.5 / (n.saturating_sub(1).max(1) as f64)).min(0.5)
}

/// Run the (n, K) grid in both modes on seeded noisy ER inputs. Flat
/// configurations that would exceed the element budget are reported as
/// "capacity" rows instead of failing.
pub fn bench_sweep(
    sizes: &[usize],
    graph_counts: &[usize],
    config: &PipelineConfig,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &n in sizes {
        for &k in graph_counts {
            let p = bench_edge_probability(n);
            let mut problem = generate_noisy_er(n, p, k, 0.10, 0.15, config.seed)?;
            let anchor_count = (n / 10).max(1);
            problem.select_anchors_from_truth(anchor_count, config.seed)?;

            for mode in [BenchMode::Hierarchical, BenchMode::Flat] {
                let run_config = PipelineConfig {
                    clusters: match mode {
                        BenchMode::Hierarchical => config.clusters,
                        BenchMode::Flat => Some(1),
                    },
                    ..config.clone()
                };
                let m = run_config.resolve_clusters(&problem.node_counts());
                if mode == BenchMode::Flat && flat_elements(n, k) > config.element_budget as u128 {
                    rows.push(BenchRow {
                        n,
                        k,
                        m,
                        mode,
                        wall_secs: 0.0,
                        allocated_elements: flat_elements(n, k),
                        status: "capacity".into(),
                    });
                    continue;
                }
                let start = Instant::now();
                match hot_align(&problem, &run_config) {
                    Ok(result) => rows.push(BenchRow {
                        n,
                        k,
                        m: result.cluster_count(),
                        mode,
                        wall_secs: start.elapsed().as_secs_f64(),
                        allocated_elements: result.allocated_elements() as u128,
                        status: "ok".into(),
                    }),
                    // A hierarchical run can still blow the budget when the
                    // clustering comes out lopsided; record it instead of
                    // aborting the sweep. The element count is unknown
                    // because the oversized cluster was never allocated.
                    Err(crate::error::Error::Capacity(_)) => rows.push(BenchRow {
                        n,
                        k,
                        m,
                        mode,
                        wall_secs: start.elapsed().as_secs_f64(),
                        allocated_elements: 0,
                        status: "capacity".into(),
                    }),
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(rows)
}

/// CSV rows `n,K,M,mode,wall_secs,allocated_elements,status`.
pub fn write_bench_csv(rows: &[BenchRow], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    writeln!(out, "n,K,M,mode,wall_secs,allocated_elements,status")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n, r.k, r.m, r.mode, r.wall_secs, r.allocated_elements, r.status
        )?;
    }
    out.flush()?;
    Ok(())
}
