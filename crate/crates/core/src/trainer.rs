//! Stratified splitting, mini-batch Adam training with early stopping on
//! validation loss, and multi-seed experiments.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::augmented_source;
use crate::eval::{self, EvalError, EvalReport};
use crate::features::{FeatureKind, FeatureMatrix};
use crate::models::{Model, ModelConfig, ModelError, Standardizer};
use crate::nn::{self, AdamConfig, AdamState, NnError, Tensor};

/// Minimum decrease of validation loss that counts as an improvement.
pub const IMPROVEMENT_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("class `{class}` has {count} sample(s); a stratified split needs at least 2")]
    TooFewSamples { class: String, count: usize },
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("non-finite training loss at epoch {epoch}, batch {batch} (lr {lr}); check the learning rate and initialisation")]
    NonFinite { epoch: usize, batch: usize, lr: f64 },
    #[error("no features of kind {0} in the dataset")]
    MissingFeatures(FeatureKind),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl From<NnError> for TrainError {
    fn from(e: NnError) -> Self {
        TrainError::Model(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub patience: usize,
    pub val_fraction: f64,
    pub seeds: Vec<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs_max: 30,
            batch_size: 32,
            lr: 0.001,
            patience: 5,
            val_fraction: 0.2,
            seeds: vec![1, 2, 3],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction));
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs_max == 0 {
            return bad("epochs_max must be at least 1".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        Ok(())
    }
}

/// Early-stopping bookkeeping. Epochs are numbered from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best_loss: f64,
    best_epoch: usize,
    epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            epoch: 0,
            stale: 0,
        }
    }

    /// Records one epoch's validation loss. Returns whether it is a new best.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        self.epoch += 1;
        if val_loss < self.best_loss - IMPROVEMENT_TOLERANCE || self.best_epoch == 0 {
            self.best_loss = val_loss;
            self.best_epoch = self.epoch;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

impl TrainHistory {
    /// One JSON object per epoch, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|r| serde_json::to_string(r).expect("epoch record serialises") + "\n")
            .collect()
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.get(self.best_epoch.checked_sub(1)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: FeatureMatrix,
    pub label: usize,
}

impl Sample {
    pub fn clip_id(&self) -> &str {
        &self.features.clip_id
    }
}

/// Labelled feature matrices of a single kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: FeatureKind,
    pub class_names: Vec<String>,
    pub samples: Vec<Sample>,
}

/// Per-class shuffled split of sample indices. Each class contributes
/// `round(n · val_fraction)` validation samples, clamped to `[1, n-1]`.
pub fn stratified_split(
    labels: &[usize],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), TrainError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(TrainError::Config(format!(
            "val_fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (class, mut idx) in by_class {
        let n = idx.len();
        if n < 2 {
            return Err(TrainError::TooFewSamples {
                class: class.to_string(),
                count: n,
            });
        }
        let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1);
        idx.shuffle(&mut rng);
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Splits a dataset on its original clips. Augmented copies follow their
/// source clip into the training split and are dropped otherwise.
pub fn split_dataset(
    dataset: &Dataset,
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<Sample>, Vec<Sample>), TrainError> {
    let mut originals: Vec<&Sample> = dataset
        .samples
        .iter()
        .filter(|s| augmented_source(s.clip_id()).is_none())
        .collect();
    originals.sort_by(|a, b| a.clip_id().cmp(b.clip_id()));
    let labels: Vec<usize> = originals.iter().map(|s| s.label).collect();
    let (tr, va) = stratified_split(&labels, val_fraction, seed).map_err(|e| match e {
        TrainError::TooFewSamples { class, count } => TrainError::TooFewSamples {
            class: class
                .parse::<usize>()
                .ok()
                .and_then(|c| dataset.class_names.get(c).cloned())
                .unwrap_or(class),
            count,
        },
        other => other,
    })?;
    let train_ids: BTreeSet<&str> = tr.iter().map(|&i| originals[i].clip_id()).collect();
    let mut train: Vec<Sample> = tr.iter().map(|&i| originals[i].clone()).collect();
    train.extend(
        dataset
            .samples
            .iter()
            .filter(|s| augmented_source(s.clip_id()).is_some_and(|src| train_ids.contains(src)))
            .cloned(),
    );
    let val = va.iter().map(|&i| originals[i].clone()).collect();
    Ok((train, val))
}

/// Mean cross-entropy, and predicted classes, over prepared inputs.
fn evaluate_prepared(
    model: &Model,
    inputs: &[(Tensor, usize)],
) -> Result<(f64, Vec<usize>), TrainError> {
    let mut loss = 0.0;
    let mut preds = Vec::with_capacity(inputs.len());
    for (x, label) in inputs {
        let probs = model.predict(x)?;
        loss += nn::cross_entropy(&probs, *label)?;
        preds.push(argmax(&probs));
    }
    Ok((loss / inputs.len() as f64, preds))
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

fn accuracy(labels: impl Iterator<Item = usize>, preds: &[usize]) -> f64 {
    let hits = labels.zip(preds).filter(|(l, p)| l == *p).count();
    hits as f64 / preds.len().max(1) as f64
}

/// Predicted class for every sample, using the model's own standardiser.
pub fn predict_samples(model: &Model, samples: &[Sample]) -> Result<Vec<usize>, TrainError> {
    samples
        .iter()
        .map(|s| Ok(argmax(&model.predict(&model.prepare(&s.features)?)?)))
        .collect()
}

/// Trains `model` in place. The standardiser is fitted on `train`; weights
/// are kept at `f32` precision after every update, and the weights of the
/// best validation-loss epoch are restored before returning.
pub fn train(
    model: &mut Model,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainHistory, TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptySplit("training"));
    }
    if val.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }
    model.standardizer = Some(Standardizer::fit(
        train.iter().map(|s| &s.features),
        model.config.input_frames,
    ));
    model.quantize_f32();
    let prepare = |set: &[Sample]| -> Result<Vec<(Tensor, usize)>, TrainError> {
        set.iter()
            .map(|s| Ok((model.prepare(&s.features)?, s.label)))
            .collect()
    };
    let train_inputs = prepare(train)?;
    let val_inputs = prepare(val)?;

    let adam_cfg = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(adam_cfg, model.params())?;
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_params = model.flat_params();
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_inputs.len()).collect();

    for epoch in 1..=cfg.epochs_max {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads = model.zero_grads();
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                let (x, label) = &train_inputs[i];
                let (loss, probs) = model.accumulate_gradients(x, *label, scale, &mut grads)?;
                batch_loss += loss;
                hits += usize::from(argmax(&probs) == *label);
            }
            if !batch_loss.is_finite() || grads.iter().any(|g| !g.all_finite()) {
                return Err(TrainError::NonFinite {
                    epoch,
                    batch: b + 1,
                    lr: cfg.lr,
                });
            }
            loss_sum += batch_loss;
            adam.step(&mut model.params_mut(), &grads)?;
            model.quantize_f32();
        }

        let (val_loss, val_preds) = evaluate_prepared(model, &val_inputs)?;
        if !val_loss.is_finite() {
            return Err(TrainError::NonFinite {
                epoch,
                batch: 0,
                lr: cfg.lr,
            });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train_inputs.len() as f64,
            train_accuracy: hits as f64 / train_inputs.len() as f64,
            val_loss,
            val_accuracy: accuracy(val_inputs.iter().map(|(_, l)| *l), &val_preds),
        });
        log::debug!(
            "{} seed {seed} epoch {epoch}: train loss {:.4}, val loss {val_loss:.4}",
            model.config.id(),
            loss_sum / train_inputs.len() as f64
        );
        if stopper.observe(val_loss) {
            best_params = model.flat_params();
        }
        history.stopped_epoch = epoch;
        if stopper.should_stop() {
            break;
        }
    }
    history.best_epoch = stopper.best_epoch();
    model.set_flat_params(&best_params)?;
    Ok(history)
}

/// Outcome of one (config, seed) run, evaluated on its validation split.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub model: Model,
    pub history: TrainHistory,
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ModelConfig,
    pub runs: Vec<RunOutcome>,
    /// Metrics averaged over `runs`.
    pub mean: EvalReport,
}

/// Builds, trains and evaluates one model for a single seed. The split and
/// the initial weights both derive from `seed`.
pub fn run_seed(
    config: &ModelConfig,
    cfg: &TrainConfig,
    dataset: &Dataset,
    seed: u64,
) -> Result<RunOutcome, TrainError> {
    if dataset.kind != config.feature_kind {
        return Err(TrainError::MissingFeatures(config.feature_kind));
    }
    let (train_set, val_set) = split_dataset(dataset, cfg.val_fraction, seed)?;
    let mut model = Model::build(config, seed)?;
    let history = train(&mut model, &train_set, &val_set, cfg, seed)?;
    let preds = predict_samples(&model, &val_set)?;
    let labels: Vec<usize> = val_set.iter().map(|s| s.label).collect();
    let cm = eval::confusion(&labels, &preds, &dataset.class_names)?;
    let report = eval::metrics(&cm, config.id(), config.display_name(), vec![seed])?;
    Ok(RunOutcome {
        seed,
        model,
        history,
        report,
    })
}

/// Trains every config with every seed and averages the validation metrics.
/// `datasets` must hold one dataset per feature kind used by `configs`.
pub fn run_experiment(
    configs: &[ModelConfig],
    cfg: &TrainConfig,
    datasets: &[Dataset],
) -> Result<Vec<ExperimentResult>, TrainError> {
    cfg.validate()?;
    configs
        .iter()
        .map(|config| {
            let dataset = datasets
                .iter()
                .find(|d| d.kind == config.feature_kind)
                .ok_or(TrainError::MissingFeatures(config.feature_kind))?;
            if dataset.samples.is_empty() {
                return Err(TrainError::EmptySplit("dataset"));
            }
            let runs = cfg
                .seeds
                .iter()
                .map(|&seed| run_seed(config, cfg, dataset, seed))
                .collect::<Result<Vec<_>, _>>()?;
            let reports: Vec<EvalReport> = runs.iter().map(|r| r.report.clone()).collect();
            Ok(ExperimentResult {
                config: config.clone(),
                mean: eval::aggregate(&reports)?,
                runs,
            })
        })
        .collect()
}
