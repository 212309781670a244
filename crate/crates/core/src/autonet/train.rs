use ndarray::ArrayView2;

use super::objective::{gradients_with_code_energy, Hyperparams, LossBreakdown};
use super::optim::{sgd_momentum_step, OptimizerState};
use super::{encode, NetParams};
use crate::error::{FdscError, Result};
use crate::graph::AdjacencyMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Loss at the start of each epoch, i.e. the point the step was taken from.
    pub trace: Vec<LossBreakdown>,
}

/// Upper bound on the largest eigenvalue of the loss Hessian in `R`:
/// `2 l1 + l2 |Z|_F^2 + l3 beta^2`.
pub fn r_curvature(params: &NetParams, hyper: &Hyperparams, x: ArrayView2<f64>) -> Result<f64> {
    let z = encode(&params.encoder, x)?;
    Ok(curvature_from_code_energy(hyper, z.iter().map(|v| v * v).sum()))
}

fn curvature_from_code_energy(hyper: &Hyperparams, zz: f64) -> f64 {
    2.0 * hyper.lambda1 + hyper.lambda2 * zz + hyper.lambda3 * hyper.beta * hyper.beta
}

/// Full-batch local training: one gradient step per epoch over the whole shard.
pub fn train_local(
    x: ArrayView2<f64>,
    params: &mut NetParams,
    hyper: &Hyperparams,
    a: &AdjacencyMatrix,
    epochs: usize,
    state: &mut OptimizerState,
) -> Result<TrainOutcome> {
    if !params.r.diagonal_is_zero() {
        return Err(FdscError::Data("diag(R) must be zero before training".into()));
    }
    let mut trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let wrap = |e: FdscError| FdscError::Epoch {
            epoch,
            source: Box::new(e),
        };
        let (grads, breakdown, zz) = gradients_with_code_energy(params, hyper, x, a).map_err(wrap)?;
        if let Some(scale) = state.config.r_step_scale {
            // Zero curvature means R has no gradient at all.
            let l = curvature_from_code_energy(hyper, zz);
            state.r_rate = Some(if l > 0.0 { scale / l } else { 0.0 });
        }
        sgd_momentum_step(params, &grads, state).map_err(wrap)?;
        if !params.is_finite() {
            return Err(wrap(FdscError::numerics("parameters")));
        }
        trace.push(breakdown);
    }
    Ok(TrainOutcome { trace })
}
