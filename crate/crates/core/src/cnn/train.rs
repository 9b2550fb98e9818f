//! Mini-batch training with early stopping, and evaluation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{CnnConfig, TrainConfig};
use super::network::{forward, loss_and_grad, DropoutMasks, Mode};
use super::optim::{rmsprop_step, update_running_stats, RmsPropState};
use super::params::CnnParams;
use crate::data::{AttentionLabel, DecisionWindow, SplitSet};
use crate::features::SsfTensor;
use crate::math::mean_sd;
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const EVAL_BATCH: usize = 256;

/// Best-validation model with the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: CnnConfig,
    pub train_config: TrainConfig,
    pub params: CnnParams,
    /// 1-based epoch the parameters come from.
    pub epoch: usize,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
}

fn check_shapes(cfg: &CnnConfig, set: &[SsfTensor]) -> Result<()> {
    for t in set {
        if t.n_maps != cfg.in_channels || t.grid_n != cfg.input_size {
            return Err(Error::ShapeMismatch {
                what: "feature tensor".into(),
                expected: cfg.input_len(),
                found: t.n_maps * t.grid_n * t.grid_n,
            });
        }
    }
    Ok(())
}

fn gather(set: &[SsfTensor], idx: &[usize]) -> (Vec<f64>, Vec<AttentionLabel>) {
    let mut x = Vec::with_capacity(idx.len() * set.first().map_or(0, |t| t.data.len()));
    let mut y = Vec::with_capacity(idx.len());
    for &i in idx {
        x.extend(set[i].data.iter().map(|&v| f64::from(v)));
        y.push(set[i].label);
    }
    (x, y)
}

fn argmax(row: &[f64]) -> AttentionLabel {
    AttentionLabel::from_class_index(if row[1] > row[0] { 1 } else { 0 })
}

/// Eval-mode class predictions, in input order.
pub fn predict(params: &CnnParams, set: &[SsfTensor]) -> Result<Vec<AttentionLabel>> {
    check_shapes(&params.config, set)?;
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut out = Vec::with_capacity(set.len());
    for chunk in idx.chunks(EVAL_BATCH) {
        let (x, _) = gather(set, chunk);
        let probs = forward(params, &x, Mode::Eval)?;
        out.extend(probs.chunks_exact(params.config.classes).map(argmax));
    }
    Ok(out)
}

fn accuracy(params: &CnnParams, set: &[SsfTensor]) -> Result<f64> {
    let pred = predict(params, set)?;
    let hits = pred.iter().zip(set).filter(|(p, t)| **p == t.label).count();
    Ok(hits as f64 / set.len() as f64)
}

/// Trains from a seeded He initialization, keeping the parameters of the
/// epoch with the best validation accuracy.
pub fn train(
    cnn: &CnnConfig,
    tc: &TrainConfig,
    train_set: &[SsfTensor],
    validation: &[SsfTensor],
) -> Result<TrainOutcome> {
    cnn.validate()?;
    tc.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if validation.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    check_shapes(cnn, train_set)?;
    check_shapes(cnn, validation)?;

    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut params = CnnParams::init(cnn, &mut rng)?;
    let mut state = RmsPropState::new(cnn);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, CnnParams)> = None;
    let mut stale = 0;

    for epoch in 0..tc.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for chunk in order.chunks(tc.batch_size) {
            let (x, y) = gather(train_set, chunk);
            let masks = DropoutMasks::draw(cnn, chunk.len(), &mut rng);
            let (loss, grads, act) = match loss_and_grad(&params, &x, &y, &masks) {
                Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch: epoch + 1 }),
                r => r?,
            };
            loss_sum += loss * chunk.len() as f64;
            hits += act
                .probs
                .chunks_exact(cnn.classes)
                .zip(&y)
                .filter(|(p, l)| argmax(p) == **l)
                .count();
            rmsprop_step(&mut params, &grads, &mut state, epoch, tc)?;
            update_running_stats(&mut params, &act.batch_mean, &act.batch_var);
        }
        let val_acc = accuracy(&params, validation).map_err(|e| match e {
            Error::NonFinite(_) => Error::Diverged { epoch: epoch + 1 },
            e => e,
        })?;
        history.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / train_set.len() as f64,
            train_acc: hits as f64 / train_set.len() as f64,
            val_acc,
        });
        if best.as_ref().is_none_or(|b| val_acc > b.0) {
            best = Some((val_acc, epoch + 1, params.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= tc.early_stop_patience {
                break;
            }
        }
    }
    let (validation_accuracy, epoch, params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            format_version: CHECKPOINT_VERSION,
            config: cnn.clone(),
            train_config: tc.clone(),
            params,
            epoch,
            validation_accuracy,
        },
        history,
    })
}

/// Extracts features for the train and validation partitions, then trains.
pub fn train_on_split<F>(
    cnn: &CnnConfig,
    tc: &TrainConfig,
    split: &SplitSet,
    mut feature_fn: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&DecisionWindow) -> Result<SsfTensor>,
{
    let tr = split
        .train
        .iter()
        .map(&mut feature_fn)
        .collect::<Result<Vec<_>>>()?;
    let va = split
        .validation
        .iter()
        .map(&mut feature_fn)
        .collect::<Result<Vec<_>>>()?;
    train(cnn, tc, &tr, &va)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectAccuracy {
    pub subject: String,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Accuracy overall and per subject, with the across-subject mean and
/// population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub n_windows: usize,
    /// Sorted by subject id.
    pub per_subject: Vec<SubjectAccuracy>,
    pub subject_mean: f64,
    pub subject_sd: f64,
}

impl Metrics {
    /// From `(subject, truth, prediction)` triples.
    pub fn from_outcomes<'a>(
        outcomes: impl IntoIterator<Item = (&'a str, AttentionLabel, AttentionLabel)>,
    ) -> Result<Self> {
        let mut by: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (s, truth, pred) in outcomes {
            let e = by.entry(s).or_default();
            e.0 += usize::from(truth == pred);
            e.1 += 1;
        }
        if by.is_empty() {
            return Err(Error::Empty("evaluation windows"));
        }
        let per_subject: Vec<SubjectAccuracy> = by
            .into_iter()
            .map(|(s, (c, t))| SubjectAccuracy {
                subject: s.into(),
                correct: c,
                total: t,
                accuracy: c as f64 / t as f64,
            })
            .collect();
        let (correct, total) = per_subject
            .iter()
            .fold((0, 0), |a, s| (a.0 + s.correct, a.1 + s.total));
        let accs: Vec<f64> = per_subject.iter().map(|s| s.accuracy).collect();
        let (subject_mean, subject_sd) = mean_sd(&accs);
        Ok(Metrics {
            accuracy: correct as f64 / total as f64,
            n_windows: total,
            per_subject,
            subject_mean,
            subject_sd,
        })
    }
}

/// Eval-mode accuracy of a checkpoint on a set of tensors.
pub fn evaluate(checkpoint: &Checkpoint, set: &[SsfTensor]) -> Result<Metrics> {
    if set.is_empty() {
        return Err(Error::Empty("evaluation windows"));
    }
    let pred = predict(&checkpoint.params, set)?;
    Metrics::from_outcomes(
        set.iter()
            .zip(pred)
            .map(|(t, p)| (t.subject_id.as_str(), t.label, p)),
    )
}
