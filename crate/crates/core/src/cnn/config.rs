use alloc::format;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Network shape and regularization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    /// Maps per input tensor (`S`).
    pub in_channels: usize,
    /// Side of the square input maps; must be even.
    pub input_size: usize,
    pub conv_filters: usize,
    pub fc_sizes: [usize; 2],
    pub classes: usize,
    pub dropout_p: f64,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            in_channels: 1,
            input_size: 32,
            conv_filters: 8,
            fc_sizes: [512, 32],
            classes: 2,
            dropout_p: 0.5,
            bn_momentum: 0.9,
            bn_epsilon: 1e-5,
        }
    }
}

pub const KERNEL: usize = 3;

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("cnn: {m}")));
        if self.in_channels == 0 {
            return bad("in_channels must be >= 1");
        }
        if self.conv_filters == 0 {
            return bad("conv_filters must be >= 1");
        }
        if self.input_size < 2 || !self.input_size.is_multiple_of(2) {
            return bad("input_size must be even and >= 2");
        }
        if self.fc_sizes.contains(&0) {
            return bad("fc sizes must be >= 1");
        }
        if self.classes != 2 {
            return bad("only two classes are supported");
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad("dropout_p must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.bn_momentum) {
            return bad("bn_momentum must lie in [0, 1)");
        }
        if !(self.bn_epsilon > 0.0) {
            return bad("bn_epsilon must be > 0");
        }
        Ok(())
    }

    /// Values per input example.
    pub fn input_len(&self) -> usize {
        self.in_channels * self.input_size * self.input_size
    }

    pub fn pooled_size(&self) -> usize {
        self.input_size / 2
    }

    /// Length of the flattened pooled feature maps.
    pub fn flat_len(&self) -> usize {
        self.conv_filters * self.pooled_size() * self.pooled_size()
    }
}

/// Optimizer and schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Learning-rate decay per epoch: `lr / (1 + decay * epoch)`.
    pub decay: f64,
    pub rmsprop_rho: f64,
    pub rmsprop_epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            decay: 1e-3,
            rmsprop_rho: 0.9,
            rmsprop_epsilon: 1e-8,
            batch_size: 64,
            max_epochs: 50,
            early_stop_patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("training: {m}")));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if !(self.decay >= 0.0) {
            return bad("decay must be >= 0");
        }
        if !(self.rmsprop_rho > 0.0 && self.rmsprop_rho < 1.0) {
            return bad("rmsprop_rho must lie in (0, 1)");
        }
        if !(self.rmsprop_epsilon > 0.0) {
            return bad("rmsprop_epsilon must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1");
        }
        Ok(())
    }

    /// Learning rate used during `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate / (1.0 + self.decay * epoch as f64)
    }
}
