//! Compact convolutional classifier over SSF tensors, trained with RMSProp.

mod config;
mod network;
mod optim;
mod params;
mod train;

pub use config::{CnnConfig, TrainConfig, KERNEL};
pub use network::{
    cross_entropy, forward, forward_cached, loss_and_grad, Activations, DropoutMasks, Mode,
};
pub use optim::{rmsprop_step, update_running_stats, RmsPropState};
pub use params::{quantize, trainable_shapes, CnnParams, Gradients, TRAINABLE};
pub use train::{
    evaluate, predict, train, train_on_split, Checkpoint, EpochRecord, Metrics, SubjectAccuracy,
    TrainOutcome, CHECKPOINT_VERSION,
};
