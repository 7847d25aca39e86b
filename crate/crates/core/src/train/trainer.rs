use std::fmt::Write as _;
use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arch::Model;
use crate::data::Dataset;
use crate::error::{precondition, Error, Result};
use crate::eval::{argmax, evaluate};
use crate::layers::Module;
use crate::ops::softmax_cross_entropy;
use crate::Tensor;

use super::{lr_at_epoch, Augmentation, Sgd, TrainConfig};

/// Share of the training jujubes held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.06;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub steps: usize,
}

pub const LOG_HEADER: &str = "epoch,lr,train_loss,train_acc,val_acc";

impl EpochLog {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6}",
            self.epoch, self.lr, self.train_loss, self.train_acc, self.val_acc
        )
    }
}

pub fn log_csv(log: &[EpochLog]) -> String {
    let mut s = format!("{LOG_HEADER}\n");
    for e in log {
        let _ = writeln!(s, "{}", e.csv_row());
    }
    s
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Model after the last epoch run.
    pub model: Model<f32>,
    /// Snapshot with the highest validation accuracy (earliest on ties).
    pub best: Model<f32>,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

/// Trains for `cfg.epochs` epochs. Returns the final model, the best
/// validation checkpoint and the per-epoch log.
pub fn train(
    model: Model<f32>,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(model, train_set, val_set, cfg, |_, _| {
        ControlFlow::Continue(())
    })
}

/// [`train`] with a callback after each epoch; `Break` ends the run early
/// (the learning-rate schedule still refers to `cfg.epochs`).
pub fn train_with<F>(
    mut model: Model<f32>,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpochLog, &Model<f32>) -> ControlFlow<()>,
{
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return precondition("train", "training and validation sets must be non-empty");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Sgd::new(cfg.momentum, cfg.weight_decay);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Model<f32>)> = None;
    for epoch in 0..cfg.epochs {
        let lr = lr_at_epoch(cfg, epoch);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct, mut steps) = (0.0f64, 0usize, 0usize);
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let (x, labels) = train_set.batch(idx)?;
            let x = if cfg.augment {
                augment_batch(&x, &mut rng)?
            } else {
                x
            };
            let logits = model.forward_train(&x)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss at epoch {epoch}, batch {b}"
                )));
            }
            model.backward(&grad)?;
            opt.step(&mut model, lr)
                .map_err(|e| Error::NonFinite(format!("epoch {epoch}, batch {b}: {e}")))?;
            loss_sum += loss as f64 * idx.len() as f64;
            correct += (0..logits.n())
                .filter(|&i| argmax(logits.sample(i)) == labels[i])
                .count();
            steps += 1;
        }
        model.clear_cache();
        let val_acc = evaluate(&model, val_set)?.accuracy;
        let entry = EpochLog {
            epoch,
            lr,
            train_loss: loss_sum / train_set.len() as f64,
            train_acc: correct as f64 / train_set.len() as f64,
            val_acc,
            steps,
        };
        log::info!("{}", entry.csv_row());
        if best.as_ref().is_none_or(|(acc, _, _)| val_acc > *acc) {
            best = Some((val_acc, epoch, model.clone()));
        }
        log.push(entry);
        if on_epoch(&entry, &model).is_break() {
            break;
        }
    }
    let (_, best_epoch, best) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        best,
        best_epoch,
        log,
    })
}

fn augment_batch(x: &Tensor<f32>, rng: &mut ChaCha8Rng) -> Result<Tensor<f32>> {
    let mut out = x.clone();
    for i in 0..x.n() {
        let a = Augmentation::sample(rng);
        if a.is_identity() {
            continue;
        }
        let single = Tensor::new([1, x.c(), x.h(), x.w()], x.sample(i).to_vec())?;
        out.sample_mut(i).copy_from_slice(a.apply(&single)?.data());
    }
    Ok(out)
}
