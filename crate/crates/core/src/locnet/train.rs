use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::LocNet;
use crate::dataset::Dataset;
use crate::error::{bail, Result};
use crate::nn::{euclidean_loss, Adam, AdamConfig, Layer, Mode};
use crate::rng::{derive_seed, label, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub lr_schedule: LrSchedule,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    pub seed: u64,
    /// Batch size used when scoring the validation set.
    pub eval_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            adam: AdamConfig::default(),
            lr_schedule: LrSchedule::Constant,
            patience: Some(20),
            seed: 0,
            eval_batch_size: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            bail!(Config, "training needs at least one epoch");
        }
        if self.batch_size < 2 {
            bail!(Config, "batch size must be at least 2 for batch normalization");
        }
        if self.eval_batch_size == 0 {
            bail!(Config, "eval batch size must be positive");
        }
        if !(self.adam.lr >= 0.0) || !self.adam.lr.is_finite() {
            bail!(Config, "learning rate must be finite and >= 0");
        }
        Ok(())
    }
}

/// Per-epoch learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LrSchedule {
    Constant,
    /// Half-cosine from the base rate down to `floor * base` at the last epoch.
    Cosine { floor: f64 },
}

impl LrSchedule {
    pub fn lr(&self, base: f64, epoch: usize, epochs: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::Cosine { floor } => {
                let t = if epochs > 1 { (epoch - 1) as f64 / (epochs - 1) as f64 } else { 0.0 };
                base * (floor + (1.0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

/// Mean loss over a dataset in eval mode.
pub fn dataset_loss(model: &mut LocNet<f32>, data: &Dataset, batch_size: usize, clean_labels: bool) -> Result<f64> {
    let mut total = 0.0;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(batch_size.max(1)) {
        let x = data.batch_inputs(chunk)?;
        let y = data.batch_labels(chunk, clean_labels)?;
        let pred = model.forward(&x, Mode::Eval)?;
        let (loss, _) = euclidean_loss(&pred, &y)?;
        total += loss as f64 * chunk.len() as f64;
    }
    Ok(total / data.len().max(1) as f64)
}

/// Adam on the Euclidean loss with per-epoch validation; the weights with the
/// lowest validation loss are restored before returning.
pub fn train(model: &mut LocNet<f32>, train_set: &Dataset, val_set: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    train_with_progress(model, train_set, val_set, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with_progress(
    model: &mut LocNet<f32>,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.len() < 2 || val_set.is_empty() {
        bail!(InvalidArgument, "training needs >= 2 training samples and a non-empty validation set");
    }
    if train_set.dims != model.config().input_shape || val_set.dims != train_set.dims {
        bail!(
            Shape,
            "model expects {:?} inputs, datasets hold {:?} / {:?}",
            model.config().input_shape,
            train_set.dims,
            val_set.dims
        );
    }
    let mut adam = Adam::new(cfg.adam);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0usize, snapshot(model));
    let mut since_best = 0;
    let mut stopped_early = false;
    model.dropout.reseed(derive_seed(cfg.seed, label::DROPOUT, 0));
    for epoch in 1..=cfg.epochs {
        adam.config.lr = cfg.lr_schedule.lr(cfg.adam.lr, epoch, cfg.epochs);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut stream(cfg.seed, label::BATCHING, epoch as u64));
        let mut sum = 0.0;
        let mut seen = 0usize;
        for (batch_index, batch) in order.chunks(cfg.batch_size).filter(|b| b.len() >= 2).enumerate() {
            let x = train_set.batch_inputs(batch)?;
            let y = train_set.batch_labels(batch, false)?;
            model.zero_grad();
            let pred = model.forward(&x, Mode::Train)?;
            let (loss, grad) = euclidean_loss(&pred, &y)?;
            if !loss.is_finite() {
                bail!(
                    Numeric,
                    "training loss became {} at epoch {}, batch {} (lr {})",
                    loss,
                    epoch,
                    batch_index,
                    adam.config.lr
                );
            }
            model.backward(&grad)?;
            adam.step(model.params_mut())?;
            sum += loss as f64 * batch.len() as f64;
            seen += batch.len();
        }
        let train_loss = sum / seen as f64;
        let val_loss = dataset_loss(model, val_set, cfg.eval_batch_size, false)?;
        if !val_loss.is_finite() {
            bail!(Numeric, "validation loss became {} at epoch {}", val_loss, epoch);
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
        };
        on_epoch(&record);
        history.push(record);
        if val_loss < best.0 {
            best = (val_loss, epoch, snapshot(model));
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience.is_some_and(|p| since_best >= p) {
                stopped_early = true;
                break;
            }
        }
    }
    restore(model, &best.2);
    Ok(TrainReport {
        history,
        best_epoch: best.1,
        best_val_loss: best.0,
        stopped_early,
    })
}

fn snapshot(model: &LocNet<f32>) -> Vec<Vec<f32>> {
    model.state().iter().map(|t| t.data().to_vec()).collect()
}

fn restore(model: &mut LocNet<f32>, saved: &[Vec<f32>]) {
    for (t, s) in model.state_mut().into_iter().zip(saved) {
        t.data_mut().copy_from_slice(s);
    }
}

pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    crate::fsutil::write_atomic(path, |w| {
        writeln!(w, "epoch,train_loss,val_loss")?;
        for r in history {
            writeln!(w, "{},{:.6},{:.6}", r.epoch, r.train_loss, r.val_loss)?;
        }
        Ok(())
    })
}
