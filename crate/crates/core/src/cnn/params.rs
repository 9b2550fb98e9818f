use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::config::{CnnConfig, KERNEL};
use crate::{Error, Result};

/// Trainable tensors in a fixed order, shared by parameters, gradients and
/// optimizer state.
pub const TRAINABLE: [&str; 10] = [
    "conv_w", "conv_b", "bn_gamma", "bn_beta", "fc1_w", "fc1_b", "fc2_w", "fc2_b", "out_w", "out_b",
];

/// One `Vec<f64>` per entry of [`TRAINABLE`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub conv_w: Vec<f64>,
    pub conv_b: Vec<f64>,
    pub bn_gamma: Vec<f64>,
    pub bn_beta: Vec<f64>,
    pub fc1_w: Vec<f64>,
    pub fc1_b: Vec<f64>,
    pub fc2_w: Vec<f64>,
    pub fc2_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
}

impl Gradients {
    pub fn zeros(cfg: &CnnConfig) -> Self {
        let shapes = trainable_shapes(cfg);
        let z = |k: usize| vec![0.0; shapes[k].iter().product()];
        Gradients {
            conv_w: z(0),
            conv_b: z(1),
            bn_gamma: z(2),
            bn_beta: z(3),
            fc1_w: z(4),
            fc1_b: z(5),
            fc2_w: z(6),
            fc2_b: z(7),
            out_w: z(8),
            out_b: z(9),
        }
    }

    pub fn tensors(&self) -> [&Vec<f64>; 10] {
        [
            &self.conv_w,
            &self.conv_b,
            &self.bn_gamma,
            &self.bn_beta,
            &self.fc1_w,
            &self.fc1_b,
            &self.fc2_w,
            &self.fc2_b,
            &self.out_w,
            &self.out_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 10] {
        [
            &mut self.conv_w,
            &mut self.conv_b,
            &mut self.bn_gamma,
            &mut self.bn_beta,
            &mut self.fc1_w,
            &mut self.fc1_b,
            &mut self.fc2_w,
            &mut self.fc2_b,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }
}

/// Shapes of the [`TRAINABLE`] tensors.
pub fn trainable_shapes(cfg: &CnnConfig) -> [Vec<usize>; 10] {
    let (f, s) = (cfg.conv_filters, cfg.in_channels);
    let [h1, h2] = cfg.fc_sizes;
    [
        vec![f, s, KERNEL, KERNEL],
        vec![f],
        vec![f],
        vec![f],
        vec![h1, cfg.flat_len()],
        vec![h1],
        vec![h2, h1],
        vec![h2],
        vec![cfg.classes, h2],
        vec![cfg.classes],
    ]
}

/// Weights (`weights`, in [`TRAINABLE`] order) plus batch-norm running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    pub config: CnnConfig,
    pub weights: Gradients,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

/// Rounds to the nearest `f32`; parameters are stored at single precision.
#[inline]
pub fn quantize(x: f64) -> f64 {
    f64::from(x as f32)
}

impl CnnParams {
    /// All weights and biases zero, batch-norm scale one.
    pub fn zeros(config: &CnnConfig) -> Result<Self> {
        config.validate()?;
        let mut weights = Gradients::zeros(config);
        weights.bn_gamma.fill(1.0);
        Ok(CnnParams {
            config: config.clone(),
            weights,
            running_mean: vec![0.0; config.conv_filters],
            running_var: vec![1.0; config.conv_filters],
        })
    }

    /// He-uniform weights for the convolution and hidden layers, Glorot-uniform
    /// for the output layer, zero biases.
    pub fn init<R: Rng + ?Sized>(config: &CnnConfig, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let he = |fan_in: usize| libm::sqrt(6.0 / fan_in as f64);
        let [h1, h2] = config.fc_sizes;
        let conv_fan = config.in_channels * KERNEL * KERNEL;
        let limits = [
            he(conv_fan),
            he(config.flat_len()),
            he(h1),
            libm::sqrt(6.0 / (h2 + config.classes) as f64),
        ];
        let w = &mut p.weights;
        for (t, lim) in [&mut w.conv_w, &mut w.fc1_w, &mut w.fc2_w, &mut w.out_w]
            .into_iter()
            .zip(limits)
        {
            let dist = Uniform::new_inclusive(-lim, lim).expect("finite limit");
            t.iter_mut().for_each(|v| *v = quantize(dist.sample(rng)));
        }
        Ok(p)
    }

    /// Named tensors with shapes, including running statistics.
    pub fn named(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        let mut out: Vec<(&'static str, Vec<usize>, &[f64])> = TRAINABLE
            .iter()
            .zip(trainable_shapes(&self.config))
            .zip(self.weights.tensors())
            .map(|((n, s), t)| (*n, s, t.as_slice()))
            .collect();
        let f = self.config.conv_filters;
        out.push(("bn_running_mean", vec![f], &self.running_mean));
        out.push(("bn_running_var", vec![f], &self.running_var));
        out
    }

    /// Inverse of [`CnnParams::named`]: every tensor must be present with its shape.
    pub fn from_named(
        config: &CnnConfig,
        mut lookup: impl FnMut(&str) -> Option<(Vec<usize>, Vec<f64>)>,
    ) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut take = |name: &str, shape: &[usize], dst: &mut Vec<f64>| -> Result<()> {
            let (s, v) = lookup(name).ok_or(Error::Empty("checkpoint tensor"))?;
            if s != shape || v.len() != dst.len() {
                return Err(Error::ShapeMismatch {
                    what: alloc::format!("tensor {name}"),
                    expected: dst.len(),
                    found: v.len(),
                });
            }
            *dst = v;
            Ok(())
        };
        let shapes = trainable_shapes(config);
        for ((name, shape), dst) in TRAINABLE.iter().zip(&shapes).zip(p.weights.tensors_mut()) {
            take(name, shape, dst)?;
        }
        let f = [config.conv_filters];
        take("bn_running_mean", &f, &mut p.running_mean)?;
        take("bn_running_var", &f, &mut p.running_var)?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, _, t) in self.named() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(alloc::format!("parameter {name}")));
            }
        }
        if self.running_var.iter().any(|v| *v <= 0.0) {
            return Err(Error::InvalidConfig("running variance must be > 0".into()));
        }
        Ok(())
    }

    pub fn n_trainable(&self) -> usize {
        self.weights.tensors().iter().map(|t| t.len()).sum()
    }
}
