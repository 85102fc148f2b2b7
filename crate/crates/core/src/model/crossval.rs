use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, ModelConfig};
use super::train::{train, TrainConfig, TrainHistory};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::loss::Prediction;

/// Patient ids assigned to each role for one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold: usize,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// Independent 64-bit seed for stream `stream` of a base seed (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Randomly partitions patients into `k` near-equal test folds. The patients
/// outside each test fold are split into train and validation with
/// `train_val_ratio` going to train (0.75 gives 3:1).
pub fn crossval_split(
    patients: &[String],
    k: usize,
    seed: u64,
    train_val_ratio: f64,
) -> Result<Vec<FoldAssignment>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if !(train_val_ratio > 0.0 && train_val_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_val_ratio must lie in (0, 1), got {train_val_ratio}"
        )));
    }
    let unique: HashSet<&str> = patients.iter().map(String::as_str).collect();
    if unique.len() != patients.len() {
        return Err(Error::InvalidArgument("duplicate patient ids".into()));
    }
    if patients.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} patients cannot fill {k} folds",
            patients.len()
        )));
    }
    if patients.len() - patients.len().div_ceil(k) < 2 {
        return Err(Error::InvalidArgument(format!(
            "{} patients leave too few for train and validation with k = {k}",
            patients.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = patients.to_vec();
    shuffled.shuffle(&mut rng);

    let n = shuffled.len();
    let bounds: Vec<usize> = (0..=k).map(|i| i * n / k).collect();
    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let test = shuffled[bounds[fold]..bounds[fold + 1]].to_vec();
        let mut rest: Vec<String> = shuffled[..bounds[fold]]
            .iter()
            .chain(&shuffled[bounds[fold + 1]..])
            .cloned()
            .collect();
        let mut fold_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, fold as u64 + 1));
        rest.shuffle(&mut fold_rng);
        let n_train = ((rest.len() as f64 * train_val_ratio).round() as usize).clamp(1, rest.len() - 1);
        let val = rest.split_off(n_train);
        folds.push(FoldAssignment {
            fold,
            train: rest,
            val,
            test,
        });
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPrediction {
    pub prediction: Prediction,
    pub fold: usize,
}

#[derive(Debug, Clone)]
pub struct CrossvalOutput {
    pub folds: Vec<FoldAssignment>,
    /// Out-of-fold predictions in dataset order; every scan exactly once.
    pub predictions: Vec<FoldPrediction>,
    pub histories: Vec<TrainHistory>,
    pub models: Vec<Mlp>,
}

pub const TRAIN_VAL_RATIO: f64 = 0.75;

/// Trains one model per fold and pools their test-fold predictions.
/// Fold `i` uses model seed `derive_seed(mcfg.seed, i)` and shuffling seed
/// `derive_seed(tcfg.seed, i)`; the split itself uses `tcfg.seed`.
pub fn run_crossval(
    dataset: &Dataset,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    k: usize,
) -> Result<CrossvalOutput> {
    let folds = crossval_split(&dataset.patient_ids(), k, tcfg.seed, TRAIN_VAL_RATIO)?;

    let results: Vec<Result<(Mlp, TrainHistory, Vec<Prediction>)>> = folds
        .par_iter()
        .map(|f| {
            let m = ModelConfig {
                seed: derive_seed(mcfg.seed, f.fold as u64),
                ..mcfg.clone()
            };
            let t = TrainConfig {
                seed: derive_seed(tcfg.seed, f.fold as u64),
                ..tcfg.clone()
            };
            let (model, hist) = train(&dataset.subset(&f.train), &dataset.subset(&f.val), &m, &t)?;
            let test = dataset.subset(&f.test);
            let preds = model.predict(test.scans())?;
            Ok((model, hist, preds))
        })
        .collect();

    let mut models = Vec::with_capacity(k);
    let mut histories = Vec::with_capacity(k);
    let mut by_scan: HashMap<String, FoldPrediction> = HashMap::with_capacity(dataset.len());
    for (fold, r) in results.into_iter().enumerate() {
        let (model, hist, preds) = r?;
        models.push(model);
        histories.push(hist);
        for p in preds {
            let id = p.scan_id.clone();
            if by_scan
                .insert(id.clone(), FoldPrediction { prediction: p, fold })
                .is_some()
            {
                return Err(Error::DataMismatch(format!("scan {id} predicted twice")));
            }
        }
    }
    let predictions = dataset
        .labels()
        .map(|l| {
            by_scan
                .remove(&l.scan_id)
                .ok_or_else(|| Error::DataMismatch(format!("scan {} never predicted", l.scan_id)))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CrossvalOutput {
        folds,
        predictions,
        histories,
        models,
    })
}
