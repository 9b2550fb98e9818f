use super::config::{CnnConfig, TrainConfig};
use super::params::{quantize, CnnParams, Gradients};
use crate::{Error, Result};

/// Running mean of squared gradients, one entry per trainable value.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropState {
    pub mean_square: Gradients,
}

impl RmsPropState {
    pub fn new(cfg: &CnnConfig) -> Self {
        RmsPropState {
            mean_square: Gradients::zeros(cfg),
        }
    }
}

/// `v <- rho v + (1 - rho) g^2`, `theta <- theta - lr_t g / (sqrt(v) + eps)` with
/// `lr_t = lr / (1 + decay * epoch)`. Updated weights are rounded to `f32`.
pub fn rmsprop_step(
    params: &mut CnnParams,
    grads: &Gradients,
    state: &mut RmsPropState,
    epoch: usize,
    cfg: &TrainConfig,
) -> Result<()> {
    let lr = cfg.learning_rate_at(epoch);
    let (rho, eps) = (cfg.rmsprop_rho, cfg.rmsprop_epsilon);
    for ((theta, g), v) in params
        .weights
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.mean_square.tensors_mut())
    {
        if theta.len() != g.len() || theta.len() != v.len() {
            return Err(Error::ShapeMismatch {
                what: "optimizer tensor".into(),
                expected: theta.len(),
                found: g.len().min(v.len()),
            });
        }
        for ((t, gi), vi) in theta.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
            *vi = rho * *vi + (1.0 - rho) * gi * gi;
            *t = quantize(*t - lr * gi / (libm::sqrt(*vi) + eps));
        }
    }
    Ok(())
}

/// Exponential update of the batch-norm running statistics.
pub fn update_running_stats(params: &mut CnnParams, batch_mean: &[f64], batch_var: &[f64]) {
    let m = params.config.bn_momentum;
    for (r, b) in params.running_mean.iter_mut().zip(batch_mean) {
        *r = quantize(m * *r + (1.0 - m) * b);
    }
    for (r, b) in params.running_var.iter_mut().zip(batch_var) {
        *r = quantize(m * *r + (1.0 - m) * b);
    }
}
