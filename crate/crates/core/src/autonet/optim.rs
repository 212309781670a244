//! Momentum SGD: `v <- mu v - lr g; theta <- theta + v`, per tensor.

use serde::{Deserialize, Serialize};

use super::NetParams;
use crate::error::{FdscError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Step size for encoder and decoder tensors.
    pub learning_rate: f64,
    pub momentum: f64,
    /// Step size for `R`; defaults to `learning_rate`.
    #[serde(default)]
    pub r_learning_rate: Option<f64>,
    /// When set, `R` steps with `scale / L` instead, where `L` bounds the
    /// curvature of the loss in `R` and is re-evaluated every epoch.
    /// Overrides `r_learning_rate`.
    #[serde(default)]
    pub r_step_scale: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            momentum: 0.9,
            r_learning_rate: None,
            r_step_scale: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let lr_ok = |v: f64| v.is_finite() && v >= 0.0;
        if !lr_ok(self.learning_rate) || !self.r_learning_rate.is_none_or(lr_ok) || !self.r_step_scale.is_none_or(lr_ok) {
            return Err(FdscError::config("learning rates must be finite and nonnegative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(FdscError::config("momentum must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn r_rate(&self) -> f64 {
        self.r_learning_rate.unwrap_or(self.learning_rate)
    }
}

/// Index of `R` in [`NetParams::tensors`] order.
pub const R_TENSOR: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    pub velocity: Vec<Vec<f64>>,
    /// Curvature-scaled `R` rate for the current epoch, when enabled.
    pub r_rate: Option<f64>,
}

impl OptimizerState {
    pub fn new(params: &NetParams, config: OptimizerConfig) -> Self {
        Self {
            config,
            velocity: params.tensors().iter().map(|t| vec![0.0; t.len()]).collect(),
            r_rate: None,
        }
    }
}

/// One momentum step; `diag(R)` is forced back to zero afterwards.
pub fn sgd_momentum_step(params: &mut NetParams, grads: &NetParams, state: &mut OptimizerState) -> Result<()> {
    let grads_t = grads.tensors();
    if grads_t.len() != state.velocity.len()
        || grads_t.iter().zip(&state.velocity).any(|(g, v)| g.len() != v.len())
        || grads.tensor_shapes() != params.tensor_shapes()
    {
        return Err(FdscError::shape("gradient / velocity / parameter shapes disagree"));
    }
    let mu = state.config.momentum;
    for (idx, ((theta, g), v)) in params
        .tensors_mut()
        .into_iter()
        .zip(grads_t)
        .zip(state.velocity.iter_mut())
        .enumerate()
    {
        let lr = if idx == R_TENSOR {
            state.r_rate.unwrap_or_else(|| state.config.r_rate())
        } else {
            state.config.learning_rate
        };
        for ((t, &gi), vi) in theta.iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = mu * *vi - lr * gi;
            *t += *vi;
        }
    }
    params.r.zero_diagonal();
    Ok(())
}
