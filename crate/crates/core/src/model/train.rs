use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::{Mlp, ModelConfig, Workspace};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::roc_auc;
use crate::labels::ScanLabel;
use crate::loss::{batch_loss, LossConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub lr0: f64,
    pub lr_decay_factor: f64,
    /// Zero-based epochs from which the next decay applies.
    pub lr_decay_epochs: Vec<usize>,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Set from the experiment's `[loss]` table.
    #[serde(skip)]
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 120,
            lr0: 1e-3,
            lr_decay_factor: 0.4,
            lr_decay_epochs: vec![40, 60, 80],
            weight_decay: 0.01,
            batch_size: 32,
            seed: 0,
            loss: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::Config("train.max_epochs must be at least 1".into()));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor < 1.0) {
            return Err(Error::Config(format!(
                "train.lr_decay_factor must lie in (0, 1), got {}",
                self.lr_decay_factor
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("train.weight_decay must be non-negative".into()));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config("train.lr0 must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        self.loss.validate()
    }

    /// Step-decayed learning rate for a zero-based epoch.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let decays = self.lr_decay_epochs.iter().filter(|&&e| e <= epoch).count();
        self.lr0 * self.lr_decay_factor.powi(decays as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    /// `None` when the validation split holds a single class.
    pub val_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Earliest epoch with the minimum validation loss.
    pub selected_epoch: usize,
}

/// Mean joint loss of `model` over every sample in `data`.
pub fn dataset_loss(model: &Mlp, data: &Dataset, loss: &LossConfig) -> Result<f64> {
    let preds = model.predict(data.scans())?;
    let labels: Vec<ScanLabel> = data.labels().cloned().collect();
    batch_loss(&preds, &labels, loss)
}

fn check_disjoint(train: &Dataset, val: &Dataset) -> Result<()> {
    let train_ids: HashSet<String> = train.patient_ids().into_iter().collect();
    let overlap: Vec<String> = val
        .patient_ids()
        .into_iter()
        .filter(|p| train_ids.contains(p))
        .collect();
    if overlap.is_empty() {
        Ok(())
    } else {
        Err(Error::DataMismatch(format!(
            "patients in both train and validation: {}",
            overlap.join(", ")
        )))
    }
}

/// Shuffled mini-batch Adam with step decay. Returns the parameters from the
/// epoch with the lowest validation loss.
pub fn train(
    train_set: &Dataset,
    val_set: &Dataset,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<(Mlp, TrainHistory)> {
    tcfg.validate()?;
    let loss = &tcfg.loss;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidArgument("train and validation splits must be non-empty".into()));
    }
    if train_set.dim() != mcfg.input_dim {
        return Err(Error::DimensionMismatch {
            expected: mcfg.input_dim,
            got: train_set.dim(),
        });
    }
    check_disjoint(train_set, val_set)?;

    let mut model = Mlp::init(mcfg, train_set.mean_t_d())?;
    let mut adam = Adam::new(model.num_params());
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut grads = vec![0.0; model.num_params()];
    let mut ws = Workspace::default();
    let samples = train_set.samples();

    let val_scores_labels = |m: &Mlp| -> Result<(f64, Option<f64>)> {
        let preds = m.predict(val_set.scans())?;
        let labels: Vec<ScanLabel> = val_set.labels().cloned().collect();
        let vl = batch_loss(&preds, &labels, loss)?;
        let scores: Vec<f64> = preds.iter().map(|p| p.y_hat).collect();
        let ys: Vec<bool> = labels.iter().map(|l| l.y).collect();
        Ok((vl, roc_auc(&scores, &ys).ok().map(|r| r.auc)))
    };

    let mut epochs = Vec::with_capacity(tcfg.max_epochs);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for epoch in 0..tcfg.max_epochs {
        let lr = tcfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut running = 0.0;
        for chunk in order.chunks(tcfg.batch_size) {
            let batch: Vec<(&[f64], &ScanLabel)> = chunk
                .iter()
                .map(|&i| (samples[i].features.as_slice(), &samples[i].label))
                .collect();
            let value = model.backward_into(&batch, loss, &mut grads, &mut ws)?;
            running += value * chunk.len() as f64;
            adam.step(model.params_mut(), &grads, lr, tcfg.weight_decay)?;
        }
        let (val_loss, val_auc) = val_scores_labels(&model)?;
        if !val_loss.is_finite() {
            return Err(Error::Undefined(format!("validation loss diverged at epoch {epoch}")));
        }
        epochs.push(EpochRecord {
            epoch,
            lr,
            train_loss: running / train_set.len() as f64,
            val_loss,
            val_auc,
        });
        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, model.params().to_vec()));
        }
    }

    let (_, selected_epoch, params) = best.expect("at least one epoch");
    let best_model = Mlp::from_params(mcfg, params)?;
    Ok((
        best_model,
        TrainHistory {
            epochs,
            selected_epoch,
        },
    ))
}
