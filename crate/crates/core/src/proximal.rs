//! Proximal point outer loop: each round solves an entropic transport
//! subproblem whose cost folds in the linearized structure term and a KL pull
//! toward the previous coupling.

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::mfgw::{mfgw_l_tensor, mfgw_objective};
use crate::sinkhorn::{sinkhorn_mm, CouplingTensor, SolverConfig};
use crate::tensor::{l1_diff, outer_product};
use ndarray::{Array2, ArrayD};

const MONOTONE_SLACK: f64 = 1e-8;
const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ProximalOutcome {
    pub coupling: CouplingTensor,
    /// Objective value at the initial coupling and after each outer round.
    pub objective_trace: Vec<f64>,
    pub outer_iterations: usize,
    /// L1 change of the coupling in the last round.
    pub final_delta: f64,
    /// Whether the L1 change dropped below `outer_tol` within the budget.
    pub converged: bool,
}

impl ProximalOutcome {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace never empty")
    }
}

/// One linearize-then-transport step from `plan`, safeguarded so the returned
/// plan never scores worse than `plan` itself.
///
/// The raw subproblem solution can overshoot because the structure term is an
/// indefinite quadratic and its linearization is not an upper bound. The
/// objective restricted to the segment from `plan` to the candidate is an
/// exact one-dimensional quadratic, so a three-point fit finds the segment
/// minimizer directly; the polytope is convex, so every blend stays feasible.
pub(crate) fn proximal_step(
    base_cost: &ArrayD<f64>,
    intra_costs: &[Array2<f64>],
    marginals: &[Measure],
    plan: &ArrayD<f64>,
    config: &SolverConfig,
) -> Result<(ArrayD<f64>, f64)> {
    let current = mfgw_objective(base_cost, intra_costs, config.alpha, plan);
    let linearized = mfgw_l_tensor(intra_costs, plan);
    let floor = config.log_floor;
    let mut modified = ArrayD::zeros(plan.raw_dim());
    ndarray::Zip::from(&mut modified)
        .and(base_cost)
        .and(&linearized)
        .and(plan)
        .for_each(|q, &c, &l, &s| {
            *q = (1.0 - config.alpha) * c + config.alpha * l
                - config.lambda * s.max(floor).ln();
        });

    // The sweep budget is extended well past the configured minimum; the
    // 1e-10 defect early stop usually fires long before the cap. Whatever
    // defect remains is then removed exactly by the rounding projection, so
    // every accepted plan (and any blend of accepted plans) is feasible.
    let sweep_cap = config.inner_iters.saturating_mul(20);
    let solved = sinkhorn_mm(&modified, marginals, config.lambda, sweep_cap)?;
    let mut candidate = solved.tensor;
    crate::sinkhorn::round_to_feasible(&mut candidate, marginals)?;

    let mass = candidate.sum();
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(Error::Numerical(format!(
            "mass {mass} drifted beyond {MASS_TOL} in transport step"
        )));
    }

    let at_candidate = mfgw_objective(base_cost, intra_costs, config.alpha, &candidate);
    if at_candidate <= current {
        return Ok((candidate, at_candidate));
    }

    let midpoint = plan * 0.5 + &candidate * 0.5;
    let at_mid = mfgw_objective(base_cost, intra_costs, config.alpha, &midpoint);
    let curvature = 2.0 * (at_candidate - 2.0 * at_mid + current);
    let slope = at_candidate - current - curvature;
    let theta = if curvature > 0.0 {
        (-slope / (2.0 * curvature)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    if theta == 0.0 {
        return Ok((plan.clone(), current));
    }
    let blended = plan * (1.0 - theta) + &candidate * theta;
    let at_blend = mfgw_objective(base_cost, intra_costs, config.alpha, &blended);
    if at_blend <= current {
        Ok((blended, at_blend))
    } else {
        Ok((plan.clone(), current))
    }
}

/// Minimize `<(1 - alpha) C + alpha L(S), S>` over the coupling polytope,
/// starting from the product measure.
pub fn proximal_solve(
    base_cost: &ArrayD<f64>,
    intra_costs: &[Array2<f64>],
    marginals: &[Measure],
    config: &SolverConfig,
) -> Result<ProximalOutcome> {
    config.validate()?;
    let k = base_cost.ndim();
    if intra_costs.len() != k || marginals.len() != k {
        return Err(Error::Validation(format!(
            "{k}-axis cost with {} intra matrices and {} marginals",
            intra_costs.len(),
            marginals.len()
        )));
    }

    let factors: Vec<_> = marginals.iter().map(|m| m.weights()).collect();
    let mut plan = outer_product(&factors);
    let mut trace = vec![mfgw_objective(base_cost, intra_costs, config.alpha, &plan)];
    let mut final_delta = f64::INFINITY;
    let mut converged = false;
    let mut rounds = 0;

    for round in 0..config.outer_iters {
        let (next, objective) = proximal_step(base_cost, intra_costs, marginals, &plan, config)
            .map_err(|e| Error::Numerical(format!("outer round {round}: {e}")))?;

        let previous = *trace.last().unwrap();
        if objective > previous + MONOTONE_SLACK {
            return Err(Error::Numerical(format!(
                "objective increased from {previous} to {objective} at outer round \
                 {round}; trace: {trace:?}"
            )));
        }

        final_delta = l1_diff(&next, &plan);
        plan = next;
        trace.push(objective);
        rounds = round + 1;
        if final_delta < config.outer_tol {
            converged = true;
            break;
        }
    }

    let marginal_error = crate::sinkhorn::marginal_defect(&plan, marginals);
    Ok(ProximalOutcome {
        coupling: CouplingTensor {
            tensor: plan,
            marginal_error,
        },
        objective_trace: trace,
        outer_iterations: rounds,
        final_delta,
        converged,
    })
}
