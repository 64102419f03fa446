//! Entropic multi-marginal Sinkhorn scaling in log-domain arithmetic.

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::tensor::{add_along_axis, logsumexp_marginal, marginal_sum, outer_product, scale_along_axis};
use ndarray::{Array1, ArrayD};
use serde::{Deserialize, Serialize};

/// Shared solver parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Entropic / proximal weight.
    pub lambda: f64,
    /// Structure vs feature trade-off in [0, 1].
    pub alpha: f64,
    /// Outer proximal rounds.
    pub outer_iters: usize,
    /// Inner Sinkhorn sweeps per outer round.
    pub inner_iters: usize,
    /// Early-stop threshold on the L1 change between successive couplings.
    pub outer_tol: f64,
    /// Positive clamp applied before taking logs of coupling entries.
    pub log_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            alpha: 0.5,
            outer_iters: 20,
            inner_iters: 50,
            outer_tol: 1e-6,
            log_floor: 1e-16,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda {} must be > 0", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} not in [0, 1]", self.alpha)));
        }
        if self.outer_iters == 0 || self.inner_iters == 0 {
            return Err(Error::Config("iteration counts must be positive".into()));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::Config("log_floor must be positive".into()));
        }
        Ok(())
    }
}

/// A dense transport plan together with its measured marginal defect.
#[derive(Debug, Clone)]
pub struct CouplingTensor {
    pub tensor: ArrayD<f64>,
    /// Max over axes of the L1 distance between the realized and prescribed marginal.
    pub marginal_error: f64,
}

impl CouplingTensor {
    pub fn total_mass(&self) -> f64 {
        self.tensor.sum()
    }
}

/// Max-per-axis L1 marginal defect of `tensor` against `marginals`.
pub fn marginal_defect(tensor: &ArrayD<f64>, marginals: &[Measure]) -> f64 {
    let mut worst = 0.0f64;
    for (axis, mu) in marginals.iter().enumerate() {
        let realized = marginal_sum(tensor, axis);
        let err: f64 = realized
            .iter()
            .zip(mu.weights().iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        worst = worst.max(err);
    }
    worst
}

// Sweeps below this defect stop early; well under the 1e-6 feasibility contract.
const INNER_STOP: f64 = 1e-10;

/// Multi-marginal Sinkhorn: `S = exp(-Q / lambda) ⊙ ⊗ u_i` after up to
/// `inner_iters` cyclic scaling sweeps over the axes.
///
/// The scaling updates run on log-potentials with per-axis max subtraction, so
/// the naive `exp(-Q/lambda)` kernel never materializes; this is what makes
/// lambda = 1e-3 usable in floating point.
pub fn sinkhorn_mm(
    cost: &ArrayD<f64>,
    marginals: &[Measure],
    lambda: f64,
    inner_iters: usize,
) -> Result<CouplingTensor> {
    let k = cost.ndim();
    if k != marginals.len() {
        return Err(Error::Validation(format!(
            "{k}-axis cost tensor with {} marginals",
            marginals.len()
        )));
    }
    for (axis, mu) in marginals.iter().enumerate() {
        if cost.shape()[axis] != mu.len() {
            return Err(Error::Validation(format!(
                "axis {axis} has {} entries but marginal has {}",
                cost.shape()[axis],
                mu.len()
            )));
        }
    }
    if !(lambda > 0.0) {
        return Err(Error::Validation(format!("lambda {lambda} must be > 0")));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("cost tensor contains non-finite entries".into()));
    }

    let log_mu: Vec<Array1<f64>> = marginals
        .iter()
        .map(|m| m.weights().mapv(|w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY }))
        .collect();

    // log_plan accumulates -cost/lambda plus the broadcast log-potentials.
    let mut log_plan = cost.mapv(|q| -q / lambda);
    for sweep in 0..inner_iters {
        for axis in 0..k {
            let lse = logsumexp_marginal(&log_plan, axis);
            if lse.iter().any(|v| v.is_nan()) {
                return Err(Error::Numerical(format!(
                    "non-finite Sinkhorn update at sweep {sweep}, axis {axis}"
                )));
            }
            // delta = new potential - old potential, folded straight into the plan.
            let delta = &log_mu[axis] - &lse;
            add_along_axis(&mut log_plan, axis, &delta);
        }
        let plan = log_plan.mapv(f64::exp);
        let defect = marginal_defect(&plan, marginals);
        if defect < INNER_STOP {
            return Ok(CouplingTensor {
                tensor: plan,
                marginal_error: defect,
            });
        }
    }
    let plan = log_plan.mapv(f64::exp);
    if plan.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "non-finite coupling after Sinkhorn sweeps".into(),
        ));
    }
    let defect = marginal_defect(&plan, marginals);
    Ok(CouplingTensor {
        tensor: plan,
        marginal_error: defect,
    })
}

/// Project a nonnegative plan onto the exact marginal polytope.
///
/// Each axis is first scaled down to its prescribed marginal where it
/// overshoots; the remaining mass deficit is restored by adding the outer
/// product of the per-axis residuals, normalized so every marginal lands
/// exactly. The L1 distortion is bounded by a small multiple of the defect,
/// so a nearly converged plan barely moves.
pub fn round_to_feasible(tensor: &mut ArrayD<f64>, marginals: &[Measure]) -> Result<()> {
    let k = tensor.ndim();
    if k != marginals.len() {
        return Err(Error::Validation(format!(
            "{k}-axis tensor with {} marginals",
            marginals.len()
        )));
    }
    for axis in 0..k {
        let realized = marginal_sum(tensor, axis);
        let factors = Array1::from_iter(
            realized
                .iter()
                .zip(marginals[axis].weights().iter())
                .map(|(&r, &m)| if r > m && r > 0.0 { m / r } else { 1.0 }),
        );
        scale_along_axis(tensor, axis, &factors);
    }
    let residuals: Vec<Array1<f64>> = (0..k)
        .map(|axis| {
            let realized = marginal_sum(tensor, axis);
            Array1::from_iter(
                realized
                    .iter()
                    .zip(marginals[axis].weights().iter())
                    .map(|(&r, &m)| (m - r).max(0.0)),
            )
        })
        .collect();
    let deficit: f64 = residuals[0].sum();
    if deficit > 1e-300 {
        let refs: Vec<&Array1<f64>> = residuals.iter().collect();
        let correction = outer_product(&refs);
        let scale = deficit.powi(k as i32 - 1).recip();
        ndarray::Zip::from(&mut *tensor)
            .and(&correction)
            .for_each(|t, &c| *t += c * scale);
    }
    Ok(())
}
