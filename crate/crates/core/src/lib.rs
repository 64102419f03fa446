//! Joint alignment of several networks through hierarchical optimal
//! transport: consensus-graph clustering at the top level, multi-marginal
//! fused Gromov-Wasserstein transport inside each cluster.

pub mod bench;
pub mod embedding;
pub mod error;
pub mod fgw;
pub mod graph;
pub mod measure;
pub mod metrics;
pub mod mfgw;
pub mod pipeline;
pub mod proximal;
pub mod sinkhorn;
pub mod tensor;

pub use error::{Error, Result};
pub use graph::{Graph, MultiNetworkProblem};
pub use measure::Measure;
pub use sinkhorn::{CouplingTensor, SolverConfig};
